#include "tsproto/dataset_io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tsproto {

static_assert(std::endian::native == std::endian::little,
              "binary dataset format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'P', 'T', 'S', '1'};

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error(path + ": " + what);
}

bool parse_double(std::string_view token, double& out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

// Fills `out` from one CSV line; expects exactly out.size() fields.
void parse_csv_line(const std::string& line, double* out, Index n,
                    const std::string& path, const char* what) {
  std::size_t pos = 0;
  for (Index i = 0; i < n; ++i) {
    std::size_t comma = line.find(',', pos);
    std::string_view token(line.data() + pos,
                           (comma == std::string::npos ? line.size() : comma) - pos);
    if (!parse_double(token, out[i]))
      fail(path, std::string("bad ") + what + " value '" + std::string(token) + "'");
    if (comma == std::string::npos) {
      if (i + 1 != n) fail(path, std::string("short ") + what + " line");
      return;
    }
    pos = comma + 1;
  }
  if (pos <= line.size()) fail(path, std::string("trailing fields on ") + what + " line");
}

std::string next_line(std::istream& in, const std::string& path, const char* what) {
  std::string line;
  if (!std::getline(in, line)) fail(path, std::string("missing ") + what + " line");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

bool mask_is_raw(const Vector& weights) {
  return ((weights.array() == 0.0) || (weights.array() == 1.0)).all();
}

Dataset read_dataset_text(std::istream& in, const std::string& path) {
  const std::string header = next_line(in, path, "header");
  long T = -1, C = -1, N = -1, labeled = -1;
  if (std::sscanf(header.c_str(), "T=%ld,C=%ld,N=%ld,labeled=%ld", &T, &C, &N,
                  &labeled) != 4)
    fail(path, "malformed header '" + header + "'");
  if (T < 1 || C < 1 || N < 1 || (labeled != 0 && labeled != 1))
    fail(path, "header fields out of range");

  Dataset data;
  data.series.reserve(N);
  data.masks.reserve(N);
  std::vector<double> row(static_cast<std::size_t>(T) * C);
  for (long i = 0; i < N; ++i) {
    parse_csv_line(next_line(in, path, "values"), row.data(), T * C, path, "values");
    Matrix x(T, C);
    for (Index t = 0; t < T; ++t)
      for (Index c = 0; c < C; ++c) x(t, c) = row[static_cast<std::size_t>(t) * C + c];
    data.series.push_back(std::move(x));

    Mask m;
    m.weights.resize(T);
    parse_csv_line(next_line(in, path, "mask"), m.weights.data(), T, path, "mask");
    m.raw = mask_is_raw(m.weights);
    data.masks.push_back(std::move(m));

    if (labeled) {
      const std::string line = next_line(in, path, "label");
      int y = 0;
      auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), y);
      if (ec != std::errc() || ptr != line.data() + line.size())
        fail(path, "bad label '" + line + "'");
      data.labels.push_back(y);
    }
  }
  return data;
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
  T value;
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
    fail(path, "truncated binary file");
  return value;
}

Dataset read_dataset_binary(std::istream& in, const std::string& path) {
  const auto T = read_pod<std::int32_t>(in, path);
  const auto C = read_pod<std::int32_t>(in, path);
  const auto N = read_pod<std::int32_t>(in, path);
  const auto labeled = read_pod<std::int32_t>(in, path);
  if (T < 1 || C < 1 || N < 1 || (labeled != 0 && labeled != 1))
    fail(path, "binary header fields out of range");

  Dataset data;
  std::vector<float> buf(static_cast<std::size_t>(T) * C);
  for (std::int32_t i = 0; i < N; ++i) {
    if (!in.read(reinterpret_cast<char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size() * sizeof(float))))
      fail(path, "truncated series block");
    Matrix x(T, C);
    for (Index t = 0; t < T; ++t)
      for (Index c = 0; c < C; ++c) x(t, c) = buf[static_cast<std::size_t>(t) * C + c];
    data.series.push_back(std::move(x));

    Mask m;
    m.weights.resize(T);
    std::vector<float> mask_buf(T);
    if (!in.read(reinterpret_cast<char*>(mask_buf.data()),
                 static_cast<std::streamsize>(mask_buf.size() * sizeof(float))))
      fail(path, "truncated mask block");
    for (Index t = 0; t < T; ++t) m.weights[t] = mask_buf[t];
    m.raw = mask_is_raw(m.weights);
    data.masks.push_back(std::move(m));

    if (labeled) data.labels.push_back(read_pod<std::int32_t>(in, path));
  }
  return data;
}

}  // namespace

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0)
    return read_dataset_binary(in, path);
  in.clear();
  in.seekg(0);
  return read_dataset_text(in, path);
}

void write_dataset(const Dataset& data, const std::string& path) {
  std::FILE* out = std::fopen(path.c_str(), "w");
  if (!out) fail(path, "cannot open for writing");
  const Index T = data.length(), C = data.channels();
  std::fprintf(out, "T=%lld,C=%lld,N=%lld,labeled=%d\n", static_cast<long long>(T),
               static_cast<long long>(C), static_cast<long long>(data.size()),
               data.labeled() ? 1 : 0);
  for (Index i = 0; i < data.size(); ++i) {
    const Matrix& x = data.series[i];
    for (Index t = 0; t < T; ++t)
      for (Index c = 0; c < C; ++c)
        std::fprintf(out, "%.17g%c", x(t, c), (t == T - 1 && c == C - 1) ? '\n' : ',');
    const Vector& w = data.masks[i].weights;
    for (Index t = 0; t < T; ++t)
      std::fprintf(out, "%.17g%c", w[t], t == T - 1 ? '\n' : ',');
    if (data.labeled()) std::fprintf(out, "%d\n", data.labels[i]);
  }
  if (std::fclose(out) != 0) fail(path, "write failed");
}

void write_dataset_binary(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out.write(kMagic, 4);
  auto put = [&](std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  const Index T = data.length(), C = data.channels();
  put(static_cast<std::int32_t>(T));
  put(static_cast<std::int32_t>(C));
  put(static_cast<std::int32_t>(data.size()));
  put(data.labeled() ? 1 : 0);
  std::vector<float> buf;
  for (Index i = 0; i < data.size(); ++i) {
    buf.clear();
    const Matrix& x = data.series[i];
    for (Index t = 0; t < T; ++t)
      for (Index c = 0; c < C; ++c) buf.push_back(static_cast<float>(x(t, c)));
    for (Index t = 0; t < T; ++t)
      buf.push_back(static_cast<float>(data.masks[i].weights[t]));
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (data.labeled()) put(data.labels[i]);
  }
  if (!out) fail(path, "write failed");
}

}  // namespace tsproto
