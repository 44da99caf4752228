#include "tsproto/aggregate.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

namespace tsproto {

namespace {

/** Modal value with lowest-key ties; -1 when the vote set is empty. */
int modal_label(const std::map<int, long>& votes) {
  int best = -1;
  long best_count = 0;
  for (const auto& [label, count] : votes)
    if (count > best_count) {
      best_count = count;
      best = label;
    }
  return best;
}

}  // namespace

IntMatrix aggregate_instances(const IntMatrix& labels, const IntMatrix& instances) {
  if (labels.rows() != instances.rows() || labels.cols() != instances.cols())
    throw std::invalid_argument("aggregate_instances: shape mismatch");
  std::map<int, std::map<int, long>> votes;
  for (Index r = 0; r < labels.rows(); ++r)
    for (Index c = 0; c < labels.cols(); ++c) {
      const int id = instances(r, c);
      if (id != 0 && labels(r, c) >= 0) ++votes[id][labels(r, c)];
    }
  std::map<int, int> winner;
  for (const auto& [id, tally] : votes) winner[id] = modal_label(tally);
  IntMatrix out = labels;
  for (Index r = 0; r < labels.rows(); ++r)
    for (Index c = 0; c < labels.cols(); ++c) {
      const int id = instances(r, c);
      if (id == 0 || labels(r, c) < 0) continue;
      const auto it = winner.find(id);
      if (it != winner.end() && it->second >= 0) out(r, c) = it->second;
    }
  return out;
}

IntMatrix aggregate_sliding_window(const IntMatrix& labels, int window) {
  if (window < 1 || window % 2 == 0)
    throw std::invalid_argument("aggregate_sliding_window: window must be odd");
  const int half = window / 2;
  IntMatrix out = labels;
  for (Index r = 0; r < labels.rows(); ++r) {
    const Index r_lo = std::max<Index>(0, r - half);
    const Index r_hi = std::min<Index>(labels.rows() - 1, r + half);
    for (Index c = 0; c < labels.cols(); ++c) {
      const Index c_lo = std::max<Index>(0, c - half);
      const Index c_hi = std::min<Index>(labels.cols() - 1, c + half);
      std::map<int, long> votes;
      for (Index i = r_lo; i <= r_hi; ++i)
        for (Index j = c_lo; j <= c_hi; ++j)
          if (labels(i, j) >= 0) ++votes[labels(i, j)];
      out(r, c) = modal_label(votes);
    }
  }
  return out;
}

IntMatrix intersect_instance_maps(const std::vector<IntMatrix>& frames) {
  if (frames.empty())
    throw std::invalid_argument("intersect_instance_maps: no frames");
  const Index H = frames.front().rows();
  const Index W = frames.front().cols();
  for (const IntMatrix& f : frames)
    if (f.rows() != H || f.cols() != W)
      throw std::invalid_argument("intersect_instance_maps: shape mismatch");

  auto same_tuple = [&](Index r1, Index c1, Index r2, Index c2) {
    for (const IntMatrix& f : frames)
      if (f(r1, c1) != f(r2, c2)) return false;
    return true;
  };

  IntMatrix out = IntMatrix::Zero(H, W);
  int next_id = 0;
  std::vector<std::pair<Index, Index>> stack;
  for (Index r = 0; r < H; ++r)
    for (Index c = 0; c < W; ++c) {
      if (out(r, c) != 0) continue;
      ++next_id;
      out(r, c) = next_id;
      stack.push_back({r, c});
      while (!stack.empty()) {
        const auto [cr, cc] = stack.back();
        stack.pop_back();
        const Index nr[4] = {cr - 1, cr + 1, cr, cr};
        const Index nc[4] = {cc, cc, cc - 1, cc + 1};
        for (int d = 0; d < 4; ++d) {
          if (nr[d] < 0 || nr[d] >= H || nc[d] < 0 || nc[d] >= W) continue;
          if (out(nr[d], nc[d]) != 0) continue;
          if (!same_tuple(cr, cc, nr[d], nc[d])) continue;
          out(nr[d], nc[d]) = next_id;
          stack.push_back({nr[d], nc[d]});
        }
      }
    }
  return out;
}

IntMatrix filter_and_assign(const IntMatrix& fine,
                            const std::vector<IntMatrix>& frames) {
  const Index H = fine.rows();
  const Index W = fine.cols();
  for (const IntMatrix& f : frames)
    if (f.rows() != H || f.cols() != W)
      throw std::invalid_argument("filter_and_assign: shape mismatch");

  // An instance survives if some pixel's full 3x3 neighborhood stays inside it.
  std::map<int, bool> survives;
  for (Index r = 0; r < H; ++r)
    for (Index c = 0; c < W; ++c) survives.emplace(fine(r, c), false);
  for (Index r = 1; r + 1 < H; ++r)
    for (Index c = 1; c + 1 < W; ++c) {
      const int id = fine(r, c);
      bool solid = true;
      for (Index dr = -1; dr <= 1 && solid; ++dr)
        for (Index dc = -1; dc <= 1; ++dc)
          if (fine(r + dr, c + dc) != id) {
            solid = false;
            break;
          }
      if (solid) survives[id] = true;
    }

  bool any = false;
  for (const auto& [id, alive] : survives) any = any || alive;
  if (!any) {
    std::fprintf(stderr,
                 "warning: no instance survives erosion, merging all pixels\n");
    return IntMatrix::Constant(H, W, 1);
  }

  // Fine instances share one id tuple; one representative pixel suffices.
  std::map<int, std::pair<Index, Index>> representative;
  for (Index r = 0; r < H; ++r)
    for (Index c = 0; c < W; ++c) representative.emplace(fine(r, c), std::make_pair(r, c));

  std::vector<int> alive_ids;
  for (const auto& [id, alive] : survives)
    if (alive) alive_ids.push_back(id);  // map order => ascending ids

  auto tuple_distance = [&](std::pair<Index, Index> a, std::pair<Index, Index> b) {
    int d = 0;
    for (const IntMatrix& f : frames)
      if (f(a.first, a.second) != f(b.first, b.second)) ++d;
    return d;
  };

  // Dropped instance -> closest surviving instance, lowest id on ties.
  std::map<int, int> reassignment;
  for (const auto& [id, alive] : survives) {
    if (alive) {
      reassignment[id] = id;
      continue;
    }
    int best_id = alive_ids.front();
    int best_d = std::numeric_limits<int>::max();
    for (int candidate : alive_ids) {
      const int d = tuple_distance(representative[id], representative[candidate]);
      if (d < best_d) {
        best_d = d;
        best_id = candidate;
      }
    }
    reassignment[id] = best_id;
  }

  IntMatrix out(H, W);
  for (Index r = 0; r < H; ++r)
    for (Index c = 0; c < W; ++c) out(r, c) = reassignment[fine(r, c)];
  return out;
}

namespace {

constexpr char kRasterMagic[4] = {'P', 'T', 'R', '1'};

}  // namespace

IntMatrix read_raster(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::memcmp(magic, kRasterMagic, 4) == 0) {
    std::int32_t h = 0, w = 0;
    in.read(reinterpret_cast<char*>(&h), 4);
    in.read(reinterpret_cast<char*>(&w), 4);
    if (!in || h < 1 || w < 1) throw std::runtime_error(path + ": bad raster header");
    IntMatrix out(h, w);
    for (Index r = 0; r < h; ++r)
      for (Index c = 0; c < w; ++c) {
        std::int32_t v;
        if (!in.read(reinterpret_cast<char*>(&v), 4))
          throw std::runtime_error(path + ": truncated raster");
        out(r, c) = v;
      }
    return out;
  }
  in.clear();
  in.seekg(0);
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error(path + ": empty raster file");
  long h = -1, w = -1;
  if (std::sscanf(header.c_str(), "H=%ld,W=%ld", &h, &w) != 2 || h < 1 || w < 1)
    throw std::runtime_error(path + ": bad raster header '" + header + "'");
  IntMatrix out(h, w);
  for (Index r = 0; r < h; ++r) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": missing raster row");
    const char* p = line.c_str();
    for (Index c = 0; c < w; ++c) {
      char* end = nullptr;
      const long v = std::strtol(p, &end, 10);
      if (end == p) throw std::runtime_error(path + ": bad raster value");
      out(r, c) = static_cast<int>(v);
      p = (*end == ',') ? end + 1 : end;
    }
  }
  return out;
}

void write_raster(const IntMatrix& raster, const std::string& path) {
  std::FILE* out = std::fopen(path.c_str(), "w");
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  std::fprintf(out, "H=%lld,W=%lld\n", static_cast<long long>(raster.rows()),
               static_cast<long long>(raster.cols()));
  for (Index r = 0; r < raster.rows(); ++r)
    for (Index c = 0; c < raster.cols(); ++c)
      std::fprintf(out, "%d%c", raster(r, c), c + 1 == raster.cols() ? '\n' : ',');
  if (std::fclose(out) != 0) throw std::runtime_error(path + ": write failed");
}

void write_raster_binary(const IntMatrix& raster, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out.write(kRasterMagic, 4);
  auto put = [&](std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  put(static_cast<std::int32_t>(raster.rows()));
  put(static_cast<std::int32_t>(raster.cols()));
  for (Index r = 0; r < raster.rows(); ++r)
    for (Index c = 0; c < raster.cols(); ++c) put(raster(r, c));
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace tsproto
