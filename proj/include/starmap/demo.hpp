#pragma once

#include <memory>
#include <vector>

#include "starmap/geometry.hpp"
#include "starmap/uam.hpp"

// Synthetic scenes used by the CLI demo, the benchmarks and the acceptance suite.
namespace starmap::demo {

inline const BBox kSceneExtent{0.0, 0.0, 500.0, 500.0};
inline const GeoOrigin kSceneOrigin{49.0, 8.4};

// 500 m x 500 m neighbourhood: a primary road, two side roads, a row of
// buildings, a park and the remote pilot's position.
inline Map scene() {
    std::vector<Feature> f;
    f.emplace_back("primary", FeatureKind::polyline, std::vector<Point>{{0, 120}, {180, 150}, {330, 140}, {500, 190}},
                   TagSet{"primary", "road"});
    f.emplace_back("north-road", FeatureKind::polyline, std::vector<Point>{{0, 400}, {260, 380}, {500, 430}}, TagSet{"road"});
    f.emplace_back("cross-road", FeatureKind::polyline, std::vector<Point>{{240, 0}, {250, 140}, {270, 390}, {250, 500}},
                   TagSet{"road"});
    const Point lots[] = {{40, 180}, {110, 190}, {170, 200}, {60, 300}, {140, 310}, {330, 60}, {410, 70}};
    for (std::size_t i = 0; i < std::size(lots); ++i) {
        const Point o = lots[i];
        f.emplace_back("building-" + std::to_string(i + 1), FeatureKind::polygon,
                       std::vector<Point>{o, {o.x + 40, o.y}, {o.x + 40, o.y + 30}, {o.x, o.y + 30}}, TagSet{"building"});
    }
    f.emplace_back("park", FeatureKind::polygon, std::vector<Point>{{300, 220}, {440, 210}, {460, 330}, {380, 360}, {310, 320}},
                   TagSet{"park"});
    f.emplace_back("pilot", FeatureKind::node, std::vector<Point>{{120, 260}}, TagSet{"pilot"});
    return Map(std::move(f), kSceneOrigin, kSceneExtent);
}

// Moderate error model: roads 5 m, buildings 2 m with a slight rotation, park
// 8 m, pilot 3 m.
inline AnnotationConfig scene_annotations() {
    AnnotationConfig cfg;
    cfg.fallback.translate = TranslationParams::isotropic(5.0);
    Annotation building;
    building.translate = TranslationParams::isotropic(2.0);
    building.transform.rotation_stddev = 0.02;
    Annotation park;
    park.translate = TranslationParams::isotropic(8.0);
    park.transform.scale_stddev = 0.03;
    cfg.tag_rules = {{"building", building}, {"park", park}, {"pilot", {{}, TranslationParams::isotropic(3.0)}}};
    return cfg;
}

inline std::shared_ptr<const UncertaintyAnnotatedMap> scene_uam() {
    return std::make_shared<const UncertaintyAnnotatedMap>(scene(), scene_annotations());
}

// The same scene with every error parameter at its degenerate value.
inline std::shared_ptr<const UncertaintyAnnotatedMap> exact_scene_uam() {
    return std::make_shared<const UncertaintyAnnotatedMap>(scene(), AnnotationConfig{});
}

// Straight 10 km road along the x axis, pure isotropic translation error.
inline std::shared_ptr<const UncertaintyAnnotatedMap> straight_road_uam(double stddev) {
    std::vector<Feature> f;
    f.emplace_back("road", FeatureKind::polyline, std::vector<Point>{{-5000, 0}, {5000, 0}}, TagSet{"road"});
    AnnotationConfig cfg;
    cfg.fallback.translate = TranslationParams::isotropic(stddev);
    return std::make_shared<const UncertaintyAnnotatedMap>(Map(std::move(f), kSceneOrigin, BBox{-5000, -500, 5000, 500}),
                                                           std::move(cfg));
}

}  // namespace starmap::demo
