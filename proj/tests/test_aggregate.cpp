#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "tsproto/aggregate.hpp"
#include "tsproto/rng.hpp"

using namespace tsproto;

namespace {

IntMatrix random_raster(Index h, Index w, int lo, int hi, Rng& rng) {
  IntMatrix m(h, w);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c)
      m(r, c) = lo + static_cast<int>(rng.uniform_int(hi - lo + 1));
  return m;
}

/** Reference instance vote: modal non-void label, ties to the lowest. */
IntMatrix brute_aggregate(const IntMatrix& labels, const IntMatrix& instances) {
  std::map<int, std::map<int, int>> votes;
  for (Index r = 0; r < labels.rows(); ++r)
    for (Index c = 0; c < labels.cols(); ++c)
      if (instances(r, c) > 0 && labels(r, c) >= 0)
        ++votes[instances(r, c)][labels(r, c)];
  IntMatrix out = labels;
  for (Index r = 0; r < labels.rows(); ++r) {
    for (Index c = 0; c < labels.cols(); ++c) {
      const int id = instances(r, c);
      // Void pixels stay void; id 0 marks pixels outside every instance.
      if (id <= 0 || labels(r, c) < 0 || votes[id].empty()) continue;
      int best = -1, best_count = 0;
      for (const auto& [label, count] : votes[id])
        if (count > best_count) {
          best = label;
          best_count = count;
        }
      out(r, c) = best;
    }
  }
  return out;
}

/** Reference sliding vote with border clipping. */
IntMatrix brute_window(const IntMatrix& labels, int window) {
  const int hw = window / 2;
  IntMatrix out = labels;
  for (Index r = 0; r < labels.rows(); ++r) {
    for (Index c = 0; c < labels.cols(); ++c) {
      std::map<int, int> votes;
      for (Index rr = std::max<Index>(0, r - hw);
           rr <= std::min<Index>(labels.rows() - 1, r + hw); ++rr)
        for (Index cc = std::max<Index>(0, c - hw);
             cc <= std::min<Index>(labels.cols() - 1, c + hw); ++cc)
          if (labels(rr, cc) >= 0) ++votes[labels(rr, cc)];
      if (votes.empty()) {
        out(r, c) = -1;
        continue;
      }
      int best = -1, best_count = 0;
      for (const auto& [label, count] : votes)
        if (count > best_count) {
          best = label;
          best_count = count;
        }
      out(r, c) = best;
    }
  }
  return out;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("instance aggregation matches the reference vote") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const IntMatrix labels = random_raster(7, 9, -1, 3, rng);
    const IntMatrix instances = random_raster(7, 9, 0, 4, rng);
    const IntMatrix got = aggregate_instances(labels, instances);
    CHECK(got == brute_aggregate(labels, instances));
    CHECK(aggregate_instances(got, instances) == got);  // idempotent
  }
}

TEST_CASE("instance aggregation leaves remaining and all-void regions alone") {
  IntMatrix labels(2, 3), instances(2, 3);
  labels <<  1, -1, 2,
             2, -1, -1;
  instances << 1, 1, 0,
               1, 2, 2;
  const IntMatrix out = aggregate_instances(labels, instances);
  // Instance 1 votes {1, 2} -> tie -> 1; instance 2 has only void pixels.
  CHECK(out(0, 0) == 1);
  CHECK(out(0, 1) == -1);   // void pixels never receive a label
  CHECK(out(1, 0) == 1);
  CHECK(out(0, 2) == 2);    // id 0: untouched
  CHECK(out(1, 1) == -1);   // all-void instance: untouched
  CHECK(out(1, 2) == -1);
}

TEST_CASE("sliding window vote matches the reference on random rasters") {
  Rng rng(4);
  for (const int window : {3, 5}) {
    const IntMatrix labels = random_raster(8, 6, -1, 4, rng);
    CHECK(aggregate_sliding_window(labels, window) ==
          brute_window(labels, window));
  }
  CHECK_THROWS_AS(aggregate_sliding_window(IntMatrix::Zero(3, 3), 4),
                  std::invalid_argument);
}

TEST_CASE("sliding window keeps void only where the window sees nothing") {
  IntMatrix labels(3, 3);
  labels << -1, -1, -1,
            -1, -1, -1,
            -1, -1,  7;
  const IntMatrix out = aggregate_sliding_window(labels, 3);
  CHECK(out(0, 0) == -1);  // 2x2 clipped window is all void
  CHECK(out(2, 2) == 7);
  CHECK(out(1, 1) == 7);
}

TEST_CASE("intersecting instance maps refines every input") {
  IntMatrix a(3, 4), b(3, 4);
  a << 1, 1, 2, 2,
       1, 1, 2, 2,
       3, 3, 3, 3;
  b << 1, 1, 1, 1,
       2, 2, 1, 1,
       2, 2, 2, 2;
  const IntMatrix out = intersect_instance_maps({a, b});

  // Components: (1,1), (1,2)->split over rows 0/1? No: (a,b) tuples.
  // Same tuple and 4-connected => same id; different tuple => different id.
  auto tuple_of = [&](Index r, Index c) {
    return std::pair<int, int>(a(r, c), b(r, c));
  };
  for (Index r = 0; r < 3; ++r)
    for (Index c = 0; c < 4; ++c)
      for (Index r2 = 0; r2 < 3; ++r2)
        for (Index c2 = 0; c2 < 4; ++c2)
          if (tuple_of(r, c) != tuple_of(r2, c2))
            CHECK(out(r, c) != out(r2, c2));  // refinement

  // Adjacent equal tuples merge.
  CHECK(out(0, 0) == out(0, 1));
  CHECK(out(0, 2) == out(1, 3));
  CHECK(out(2, 0) == out(2, 3));
  // Ids are assigned from 1 in scan order.
  CHECK(out(0, 0) == 1);
  CHECK(out.minCoeff() >= 1);
}

TEST_CASE("equal tuples split by a gap get distinct instance ids") {
  IntMatrix a(1, 5);
  a << 1, 1, 2, 1, 1;
  const IntMatrix out = intersect_instance_maps({a});
  CHECK(out(0, 0) == out(0, 1));
  CHECK(out(0, 3) == out(0, 4));
  CHECK(out(0, 0) != out(0, 3));  // same tuple, not connected
  CHECK(out(0, 2) != out(0, 0));
}

TEST_CASE("erosion filtering keeps solid instances and reassigns the rest") {
  // Instance 1 contains a full 3x3 block (survives erosion); instance 2 is
  // a thin strip (eroded away); instance 3 is another solid block.
  IntMatrix a(5, 8), b(5, 8);
  a.setConstant(1);
  b.setConstant(1);
  for (Index r = 0; r < 5; ++r) a(r, 3) = 2;           // thin strip
  for (Index r = 0; r < 5; ++r)
    for (Index c = 4; c < 8; ++c) a(r, c) = 3;         // solid block
  b.block(0, 0, 5, 4).setConstant(1);
  b.block(0, 4, 5, 4).setConstant(2);
  const std::vector<IntMatrix> frames = {a, b};
  const IntMatrix fine = intersect_instance_maps(frames);
  const IntMatrix out = filter_and_assign(fine, frames);

  const int left = out(0, 0);
  const int right = out(0, 7);
  CHECK(left != right);
  // Strip pixels share frame b's id with the left block (1 vs 1) but differ
  // from the right block in both frames -> they join the left instance.
  for (Index r = 0; r < 5; ++r) CHECK(out(r, 3) == left);
  // Solid regions keep one id apiece.
  for (Index r = 0; r < 5; ++r) {
    for (Index c = 0; c < 3; ++c) CHECK(out(r, c) == left);
    for (Index c = 4; c < 8; ++c) CHECK(out(r, c) == right);
  }
}

TEST_CASE("when nothing survives erosion everything collapses to one id") {
  IntMatrix a(2, 6);
  a << 1, 1, 2, 2, 3, 3,
       1, 1, 2, 2, 3, 3;  // nothing contains a 3x3 block
  const IntMatrix fine = intersect_instance_maps({a});
  const IntMatrix out = filter_and_assign(fine, {a});
  for (Index r = 0; r < 2; ++r)
    for (Index c = 0; c < 6; ++c) CHECK(out(r, c) == 1);
}

TEST_CASE("raster files round-trip in both formats") {
  Rng rng(8);
  const IntMatrix raster = random_raster(6, 5, -1, 9, rng);
  const std::string text = temp_path("tsproto_raster.txt");
  const std::string binary = temp_path("tsproto_raster.bin");

  write_raster(raster, text);
  CHECK(read_raster(text) == raster);
  write_raster_binary(raster, binary);
  CHECK(read_raster(binary) == raster);

  std::remove(text.c_str());
  std::remove(binary.c_str());
  CHECK_THROWS_AS(read_raster(temp_path("tsproto_no_raster.txt")),
                  std::runtime_error);
}
