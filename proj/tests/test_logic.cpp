#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "starmap/demo.hpp"
#include "starmap/fields.hpp"
#include "starmap/ingest.hpp"
#include "starmap/logic/inference.hpp"
#include "starmap/logic/parser.hpp"

using namespace starmap;
using namespace starmap::logic;

namespace {

const char* kAirspace = R"(
0.3::over(x, park).
distance(x, road) ~ normal(10, 2).
distance(x, pilot) ~ normal(100, 20).
airspace(X) :- over(X, park).
airspace(X) :- distance(X, road) < 15, distance(X, pilot) < 250.
)";

double airspace_oracle() {
    return 1.0 - (1.0 - 0.3) * (1.0 - oracle::normal_cdf(2.5) * oracle::normal_cdf(7.5));
}

QueryResult ask(const std::string& text, const std::string& atom, QueryOptions opts = {}) {
    return query(ground_program(parse_program(text), StarMap{}, {0, 0}), parse_atom(atom), opts);
}

}  // namespace

TEST(Parser, ListingStatements) {
    const Program p = parse_program("distance(x, building) ~ normal(20, 0.5).\n0.9::over(x, primary).\n");
    ASSERT_EQ(p.statements.size(), 2u);
    const auto& d = std::get<DistributionalFact>(p.statements[0]);
    EXPECT_EQ(d.atom, (Atom{"distance", {"x", "building"}}));
    EXPECT_EQ(d.mean, 20.0);
    EXPECT_EQ(d.stddev, 0.5);
    const auto& f = std::get<ProbabilisticFact>(p.statements[1]);
    EXPECT_EQ(f.probability, 0.9);
    EXPECT_EQ(f.atom, (Atom{"over", {"x", "primary"}}));
}

TEST(Parser, RulesCommentsAndThresholds) {
    const Program p = parse_program("% comment\nairspace(X) :- distance(X, road) < 15,\n    distance(X, pilot) > -2.5e1. % trailing\n");
    const auto& r = std::get<Rule>(p.statements.at(0));
    EXPECT_EQ(r.head, (Atom{"airspace", {"X"}}));
    ASSERT_EQ(r.body.size(), 2u);
    EXPECT_EQ(r.body[0].threshold->op, Comparison::less);
    EXPECT_EQ(r.body[1].threshold->value, -25.0);
    EXPECT_EQ(r.body[1].threshold->op, Comparison::greater);
}

TEST(Parser, ErrorsCarryLocation) {
    try {
        parse_program("a(x) :- b(x).\nc(x) :- d(x)\n");
        FAIL();
    } catch (const ProgramError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_EQ(e.column(), 1u);
    }
    try {
        parse_program("0.5::a(x).\n  1.5::b(x).");
        FAIL();
    } catch (const ProgramError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_EQ(e.column(), 3u);
    }
    EXPECT_THROW(parse_program("a(x) ~ uniform(0, 1)."), ProgramError);
    EXPECT_THROW(parse_program("a(x) ~ normal(0, -1)."), ProgramError);
    EXPECT_THROW(parse_program("a(x) :- b(x) = 3."), ProgramError);
}

TEST(Parser, RecursionRejected) {
    EXPECT_THROW(parse_program("a(X) :- a(X)."), ProgramError);
    EXPECT_THROW(parse_program("a(X) :- b(X).\nb(X) :- c(X).\nc(X) :- a(X)."), ProgramError);
    EXPECT_NO_THROW(parse_program("a(X) :- b(X).\na(X) :- c(X).\nb(X) :- c(X).\n0.5::c(x)."));
}

TEST(Parser, DuplicateFactRejected) {
    try {
        parse_program("0.5::a(x).\n0.2::a(x).");
        FAIL();
    } catch (const ProgramError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Parser, RoundTripRandomPrograms) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0, 1), big(-1e3, 1e3);
    const std::vector<std::string> names{"a", "b", "c", "d", "e", "f"};
    for (int trial = 0; trial < 200; ++trial) {
        Program p;
        // Facts on names[0..2], rules heading names[3..5] over lower names only.
        for (int i = 0; i < 3; ++i) {
            if (u(rng) < 0.5) {
                p.statements.push_back(ProbabilisticFact{u(rng), {names[i], {"x"}}});
            } else {
                p.statements.push_back(DistributionalFact{{names[i], {"x", "t" + std::to_string(i)}}, big(rng), u(rng) * 10});
            }
        }
        for (int i = 3; i < 6; ++i) {
            Rule r{{names[i], {"X"}}, {}};
            const int len = 1 + static_cast<int>(u(rng) * 3);
            for (int k = 0; k < len; ++k) {
                const auto j = static_cast<std::size_t>(u(rng) * i);
                Literal l{{names[j], {"X"}}, std::nullopt};
                if (u(rng) < 0.5) l.threshold = Threshold{u(rng) < 0.5 ? Comparison::less : Comparison::greater, big(rng)};
                r.body.push_back(l);
            }
            p.statements.push_back(r);
        }
        const Program back = parse_program(to_string(p));
        EXPECT_EQ(back, p) << to_string(p);
        EXPECT_EQ(to_string(back), to_string(p));
    }
}

TEST(Parser, RoundTripShippedPrograms) {
    for (const char* name : {"listing1.pl", "airspace_fixture.pl", "clearance.pl"}) {
        const auto text = ingest::read_file(std::string(STARMAP_DATA_DIR) + "/" + name);
        const Program p = parse_program(text);
        EXPECT_EQ(parse_program(to_string(p)), p) << name;
    }
}

TEST(Parser, AtomHelper) {
    EXPECT_EQ(parse_atom("airspace(X)"), (Atom{"airspace", {"X"}}));
    EXPECT_EQ(parse_atom("d(x, road)."), (Atom{"d", {"x", "road"}}));
    EXPECT_THROW(parse_atom("airspace"), ProgramError);
    EXPECT_THROW(parse_atom("a(x) b"), ProgramError);
}

TEST(Query, AirspaceFixtureExact) {
    const auto r = ask(kAirspace, "airspace(X)");
    EXPECT_EQ(r.method, Method::exact);
    EXPECT_EQ(r.mc_samples, 0u);
    EXPECT_FALSE(r.mc_stderr);
    EXPECT_NEAR(r.probability, airspace_oracle(), 1e-9);
    EXPECT_NEAR(r.probability, 0.995653, 1e-6);
}

TEST(Query, AirspaceFixtureMonteCarloAgainstBruteForce) {
    // Brute force: draw the three facts directly.
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    std::normal_distribution<double> road(10, 2), pilot(100, 20);
    int hits = 0;
    for (int i = 0; i < 1'000'000; ++i) {
        const bool park = u(rng) < 0.3;
        const bool near = road(rng) < 15;
        const bool radio = pilot(rng) < 250;
        hits += park || (near && radio);
    }
    const double brute = hits / 1e6;
    EXPECT_NEAR(brute, 0.995653, 0.001);
    const auto r = ask(kAirspace, "airspace(X)", {Method::monte_carlo, 200'000, 9});
    EXPECT_EQ(r.method, Method::monte_carlo);
    ASSERT_TRUE(r.mc_stderr);
    EXPECT_NEAR(r.probability, brute, 3 * *r.mc_stderr + 3 * std::sqrt(brute * (1 - brute) / 1e6));
}

TEST(Query, SingleFactRule) {
    EXPECT_DOUBLE_EQ(ask("0.9::over(x, primary).\nok(X) :- over(X, primary).", "ok(X)").probability, 0.9);
    EXPECT_DOUBLE_EQ(ask("1.0::ok(x).", "ok(X)").probability, 1.0);
}

TEST(Query, FactAndRulesOnSameHeadCombineByNoisyOr) {
    const auto r = ask("0.5::a(x).\n0.4::b(x).\n0.3::c(x).\na(X) :- b(X).\na(X) :- c(X).", "a(X)");
    EXPECT_NEAR(r.probability, 1 - 0.5 * 0.6 * 0.7, 1e-15);
}

TEST(Query, SharedFactForcesMonteCarlo) {
    const std::string text = "0.6::s(x).\n0.5::q1(x).\n0.3::q2(x).\na(X) :- s(X), q1(X).\na(X) :- s(X), q2(X).";
    EXPECT_THROW(ask(text, "a(X)", {Method::exact, 0, 0}), ProgramError);
    // Enumerate the joint of s by hand: a holds iff s and (q1 or q2).
    const double oracle = 0.6 * (1 - 0.5 * 0.7);
    const auto r = ask(text, "a(X)", {Method::automatic, 1'000'000, 4});
    EXPECT_EQ(r.method, Method::monte_carlo);
    EXPECT_NEAR(r.probability, oracle, 3 * *r.mc_stderr);
}

TEST(Query, SemanticErrors) {
    EXPECT_THROW(ask("0.5::a(x).", "b(X)"), ProgramError);
    EXPECT_THROW(ask("0.5::a(x).\nb(X) :- a(X) < 3.", "b(X)"), ProgramError);
    EXPECT_THROW(ask("a(x) ~ normal(1, 1).\nb(X) :- a(X).", "b(X)"), ProgramError);
    EXPECT_THROW(ask("a(x) ~ normal(1, 1).", "a(X)"), ProgramError);
    EXPECT_THROW(ask("b(X) :- c(X).", "b(X)"), ProgramError);
}

TEST(Query, MonotoneInFactProbabilities) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0, 1);
    const std::string rules = "h(X) :- a(X), b(X).\nh(X) :- c(X).\ng(X) :- h(X), d(X).\ng(X) :- a(X), e(X).\n";
    const std::vector<std::string> facts{"a", "b", "c", "d", "e"};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> p(5);
        for (auto& v : p) v = u(rng);
        const auto text = [&](const std::vector<double>& q) {
            std::string s = rules;
            for (std::size_t i = 0; i < q.size(); ++i) s += format_number(q[i]) + "::" + facts[i] + "(x).\n";
            return s;
        };
        const std::size_t k = trial % 5;
        std::vector<double> raised = p;
        raised[k] = p[k] + (1 - p[k]) * u(rng);
        for (const char* q : {"h(X)", "g(X)"}) {
            const QueryOptions mc{Method::monte_carlo, 20'000, static_cast<std::uint64_t>(trial)};
            EXPECT_GE(ask(text(raised), q, mc).probability, ask(text(p), q, mc).probability);
            if (std::string(q) == "h(X)") {
                EXPECT_GE(ask(text(raised), q).probability, ask(text(p), q).probability - 1e-15);
            }
        }
    }
}

TEST(Ground, BindsFieldsAndKeepsExplicitFacts) {
    const auto w = sample_collection(demo::scene_uam(), 20, 8);
    StarMap star = make_star_map(w);
    build_raster(star, w, Relation::over, "park", square_grid(demo::kSceneExtent, 11));
    build_raster(star, w, Relation::distance, "road", square_grid(demo::kSceneExtent, 11));
    const Point x{350, 250};
    const Program p = parse_program("a(X) :- over(X, park), distance(X, road) < 15.\nb(X) :- over(X, park).");
    const auto g = ground_program(p, star, x);
    ASSERT_EQ(g.program.statements.size(), 4u);
    const auto& over = std::get<ProbabilisticFact>(g.program.statements[0]);
    EXPECT_EQ(over.atom, (Atom{"over", {"x", "park"}}));
    EXPECT_DOUBLE_EQ(over.probability, evaluate_field(star, Relation::over, "park", 0, x));
    const auto& dist = std::get<DistributionalFact>(g.program.statements[1]);
    EXPECT_DOUBLE_EQ(dist.mean, evaluate_field(star, Relation::distance, "road", 0, x));
    EXPECT_DOUBLE_EQ(dist.stddev, std::sqrt(evaluate_field(star, Relation::distance, "road", 1, x)));
    EXPECT_EQ(std::get<Rule>(g.program.statements[2]).head, (Atom{"a", {"x"}}));

    const auto shadowed = ground_program(parse_program("0.25::over(x, park).\nb(X) :- over(X, park)."), star, x);
    ASSERT_EQ(shadowed.program.statements.size(), 2u);
    EXPECT_EQ(std::get<ProbabilisticFact>(shadowed.program.statements[0]).probability, 0.25);

    // Grounding is idempotent.
    EXPECT_EQ(ground_program(g.program, star, x).program, g.program);
    EXPECT_THROW(ground_program(parse_program("c(X) :- over(X, building)."), star, x), MissingFieldError);
}

TEST(QueryField, ThresholdProgramEqualsProbThresholdRaster) {
    const auto star = build_raster(demo::scene_uam(), Relation::distance, "road", demo::kSceneExtent, 17, 17, 30, 3);
    const GridSpec g = square_grid(demo::kSceneExtent, 13);
    const Raster q = query_field(parse_program("valid(X) :- distance(X, road) > 30."), star, parse_atom("valid(X)"), g);
    const Raster t = threshold_raster(star, "road", Comparison::greater, 30.0, g);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(q[i], t[i], 1e-12);
}

TEST(QueryField, ConstantProgram) {
    const Raster r = query_field(parse_program("1.0::ok(x)."), StarMap{}, parse_atom("ok(X)"), square_grid({0, 0, 1, 1}, 4));
    for (const double v : r.values()) EXPECT_EQ(v, 1.0);
}

TEST(QueryField, ListingProgramOnDemoScene) {
    const auto w = sample_collection(demo::scene_uam(), 40, 12);
    StarMap star = make_star_map(w);
    const GridSpec g = square_grid(demo::kSceneExtent, 21);
    build_raster(star, w, Relation::over, "park", g);
    build_raster(star, w, Relation::distance, "road", g);
    build_raster(star, w, Relation::distance, "pilot", g);
    const auto text = ingest::read_file(std::string(STARMAP_DATA_DIR) + "/listing1.pl");
    const Raster r = query_field(parse_program(text), star, parse_atom("airspace(X)"), g);
    double park_mean = 0, far_mean = 0;
    int park_n = 0, far_n = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Point x = g.node(i);
        const double p_park = evaluate_field(star, Relation::over, "park", 0, x);
        const Gaussian road = evaluate_gaussian(star, "road", x), pilot = evaluate_gaussian(star, "pilot", x);
        const double oracle = 1 - (1 - p_park) * (1 - prob_threshold(road, Comparison::less, 15) * prob_threshold(pilot, Comparison::less, 250));
        EXPECT_NEAR(r[i], oracle, 1e-12);
        EXPECT_GE(r[i], 0.0);
        EXPECT_LE(r[i], 1.0);
        if (p_park > 0.9) {
            park_mean += r[i];
            ++park_n;
        } else if (p_park == 0.0 && road.mean > 40) {
            far_mean += r[i];
            ++far_n;
        }
    }
    ASSERT_GT(park_n, 0);
    ASSERT_GT(far_n, 0);
    EXPECT_GT(park_mean / park_n, far_mean / far_n + 0.5);
}

TEST(QueryField, FailuresAreAggregated) {
    const auto star = build_raster(demo::scene_uam(), Relation::distance, "road", {0, 0, 100, 100}, 5, 5, 5, 3);
    try {
        query_field(parse_program("v(X) :- distance(X, road) > 3."), star, parse_atom("v(X)"), square_grid({50, 50, 150, 150}, 4));
        FAIL();
    } catch (const OutOfExtentError& e) {
        EXPECT_NE(std::string(e.what()).find("nodes failed"), std::string::npos);
    }
    EXPECT_THROW(query_field(parse_program("v(X) :- over(X, road)."), star, parse_atom("v(X)"), square_grid({0, 0, 1, 1}, 2)),
                 MissingFieldError);
}
