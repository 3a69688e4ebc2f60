#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <tuple>

#include "gsmap/map/voxel_store.hpp"

using namespace gsmap;

namespace {

ColoredPoint pt(double x, double y, double z) {
    ColoredPoint p;
    p.position = Eigen::Vector3d(x, y, z);
    p.color = Eigen::Vector3d(0.5, 0.5, 0.5);
    return p;
}

} // namespace

TEST_CASE("voxel_index floor arithmetic") {
    CHECK(voxel_index({0.25, -0.07, 1.30}, 0.1) == VoxelIndex{2, -1, 13});
    CHECK(voxel_index({0, 0, 0}, 0.1) == VoxelIndex{0, 0, 0});
    CHECK(voxel_index({-0.0001, 0.0999, 0.1}, 0.1) == VoxelIndex{-1, 0, 1});
}

TEST_CASE("insert_points: exact duplicate is discarded") {
    VoxelStore store(0.1, 20);
    const std::vector<ColoredPoint> pts = {pt(0.05, 0.05, 0.05), pt(0.05, 0.05, 0.05)};
    const InsertStats s = store.insert_points(pts, 0.0);
    CHECK(s.accepted == 1);
    CHECK(s.rejected_duplicate == 1);
    CHECK(s.rejected_cap == 0);
}

TEST_CASE("insert_points: per-voxel cap is enforced") {
    VoxelStore store(1.0, 5);
    // Eight points in one voxel, pairwise farther apart than min separation
    // (voxel_size / 4 = 0.25 here).
    std::vector<ColoredPoint> pts;
    for (int i = 0; i < 8; ++i)
        pts.push_back(pt(0.1 + 0.26 * (i % 3), 0.1 + 0.26 * (i / 3), 0.5));
    const InsertStats s = store.insert_points(pts, 0.0);
    CHECK(s.accepted == 5);
    CHECK(s.rejected_cap == 3);
    CHECK(s.rejected_duplicate == 0);
    CHECK(store.points_in_voxel({0, 0, 0}) == 5);
}

TEST_CASE("insert_points matches a sequential re-simulation of the rules") {
    std::mt19937 gen(404);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double voxel = 0.1, min_sep = voxel / 4.0;
    const int cap = 20;
    std::vector<ColoredPoint> pts(10000);
    for (auto& p : pts) p = pt(u(gen), u(gen), u(gen));

    VoxelStore store(voxel, cap);
    const InsertStats s = store.insert_points(pts, 1.0);

    // Independent replay with a plain map of vectors.
    std::map<std::tuple<int, int, int>, std::vector<Eigen::Vector3d>> sim;
    size_t accepted = 0, dup = 0, capped = 0;
    for (const auto& p : pts) {
        auto key = std::make_tuple(static_cast<int>(std::floor(p.position.x() / voxel)),
                                   static_cast<int>(std::floor(p.position.y() / voxel)),
                                   static_cast<int>(std::floor(p.position.z() / voxel)));
        auto& cell = sim[key];
        bool is_dup = false;
        for (const auto& q : cell)
            if ((q - p.position).norm() < min_sep) {
                is_dup = true;
                break;
            }
        if (is_dup) {
            ++dup;
        } else if (cell.size() >= static_cast<size_t>(cap)) {
            ++capped;
        } else {
            cell.push_back(p.position);
            ++accepted;
        }
    }
    CHECK(s.accepted == accepted);
    CHECK(s.rejected_duplicate == dup);
    CHECK(s.rejected_cap == capped);
    CHECK(s.accepted + s.rejected_duplicate + s.rejected_cap == pts.size());
    CHECK(s.accepted <= 20000);
    for (const auto& [key, cell] : sim) CHECK(cell.size() <= static_cast<size_t>(cap));
}

TEST_CASE("insert_points is idempotent for an already-accepted point") {
    VoxelStore store(0.1, 20);
    const std::vector<ColoredPoint> one = {pt(0.31, 0.22, 0.13)};
    CHECK(store.insert_points(one, 0.0).accepted == 1);
    const InsertStats again = store.insert_points(one, 1.0);
    CHECK(again.accepted == 0);
    CHECK(again.rejected_duplicate == 1);
    CHECK(store.total_accepted() == 1);
}

TEST_CASE("active_voxels follows the recency window") {
    VoxelStore store(0.1, 20);
    CHECK(store.active_voxels(0.0, 1.0).empty());
    store.insert_points(std::vector<ColoredPoint>{pt(0.05, 0.05, 0.05)}, 5.0);
    CHECK(store.active_voxels(5.5, 1.0).size() == 1);
    CHECK(store.active_voxels(6.5, 1.0).empty());
    CHECK(store.active_voxels(6.0, 1.0).size() == 1); // boundary: exactly the window
}

TEST_CASE("drain_for_frame: exhaustion and batching") {
    VoxelStore store(0.1, 20);
    std::vector<ColoredPoint> pts;
    for (int i = 0; i < 3; ++i) pts.push_back(pt(i, 0, 0));
    store.insert_points(pts, 0.0);
    CHECK(store.drain_for_frame(5).size() == 3);
    CHECK(store.drain_for_frame(5).empty());

    VoxelStore store2(0.1, 20);
    pts.clear();
    for (int i = 0; i < 12; ++i) pts.push_back(pt(i, 0, 0));
    store2.insert_points(pts, 0.0);
    CHECK(store2.drain_for_frame(5).size() == 5);
    CHECK(store2.drain_for_frame(5).size() == 5);
    CHECK(store2.drain_for_frame(5).size() == 2);
}

TEST_CASE("interleaved insert/drain preserves the accepted multiset") {
    std::mt19937 gen(11);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    VoxelStore store(0.1, 10);
    size_t accepted_total = 0;
    std::vector<Eigen::Vector3d> drained;
    for (int round = 0; round < 30; ++round) {
        std::vector<ColoredPoint> pts(50);
        for (auto& p : pts) p = pt(u(gen), u(gen), u(gen));
        accepted_total += store.insert_points(pts, round).accepted;
        if (round % 3 == 0)
            for (const auto& p : store.drain_for_frame(40)) drained.push_back(p.position);
    }
    for (const auto& p : store.drain_for_frame(100000)) drained.push_back(p.position);
    CHECK(drained.size() == accepted_total);
    // Drained at most once: all entries distinct.
    std::sort(drained.begin(), drained.end(), [](const auto& a, const auto& b) {
        return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
    });
    CHECK(std::adjacent_find(drained.begin(), drained.end()) == drained.end());
}

TEST_CASE("stored points in one voxel keep the minimum separation") {
    std::mt19937 gen(5);
    std::uniform_real_distribution<double> u(0.0, 0.5);
    VoxelStore store(0.1, 50);
    std::vector<ColoredPoint> pts(3000);
    for (auto& p : pts) p = pt(u(gen), u(gen), u(gen));
    store.insert_points(pts, 0.0);
    const auto all = store.drain_for_frame(1000000);
    for (size_t i = 0; i < all.size(); ++i)
        for (size_t j = i + 1; j < all.size(); ++j)
            if (voxel_index(all[i].position, 0.1) == voxel_index(all[j].position, 0.1))
                CHECK((all[i].position - all[j].position).norm() >=
                      store.min_point_separation());
}
