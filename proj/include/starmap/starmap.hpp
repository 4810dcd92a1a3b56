#pragma once

#include "starmap/errors.hpp"
#include "starmap/geometry.hpp"
#include "starmap/uam.hpp"
#include "starmap/relations.hpp"
#include "starmap/raster.hpp"
#include "starmap/gp.hpp"
#include "starmap/fields.hpp"
#include "starmap/logic/program.hpp"
#include "starmap/logic/parser.hpp"
#include "starmap/logic/inference.hpp"
#include "starmap/ingest.hpp"
#include "starmap/io.hpp"
#include "starmap/export.hpp"
#include "starmap/demo.hpp"
#include "starmap/bench.hpp"
