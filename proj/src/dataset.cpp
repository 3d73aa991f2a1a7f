#include "tire/dataset.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "tire/rng.hpp"

namespace tire {

SampleSet::SampleSet(int width, int height, std::vector<Sample> entries)
    : width_(width), height_(height), entries_(std::move(entries)) {
  if (width <= 0 || height <= 0) throw ShapeError("sample set needs positive source size");
  std::unordered_set<long long> seen;
  for (const auto& s : entries_) {
    if (s.coord.x < 0 || s.coord.x >= width || s.coord.y < 0 || s.coord.y >= height) {
      throw ShapeError("sample coordinate out of bounds");
    }
    if (!(s.value >= 0.0 && s.value <= 1.0)) {
      throw NumericError("sample value outside [0,1]");
    }
    const long long key = static_cast<long long>(s.coord.y) * width + s.coord.x;
    if (!seen.insert(key).second) throw ConfigError("duplicate sample coordinate");
  }
}

void PreprocessParams::validate() const {
  if (!(low_threshold >= 0.0 && low_threshold < 1.0))
    throw ConfigError("low_threshold must be in [0,1)");
  if (!(sampling_ratio > 0.0 && sampling_ratio <= 1.0))
    throw ConfigError("sampling_ratio must be in (0,1]");
}

SampleSet sample_uniform(const Grid& rm, const PreprocessParams& p) {
  p.validate();
  const std::size_t total = rm.size();
  const std::size_t want =
      static_cast<std::size_t>(std::floor(p.sampling_ratio * static_cast<double>(total)));
  if (want == 0) throw ConfigError("sampling_ratio yields zero samples for this grid");

  // Partial Fisher-Yates over pixel indices: first `want` slots are the draw.
  std::vector<std::uint32_t> idx(total);
  std::iota(idx.begin(), idx.end(), 0u);
  Rng rng(mix_seed(p.seed, 0x5a3d1eULL));
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(total - i));
    std::swap(idx[i], idx[j]);
  }

  std::vector<Sample> entries;
  entries.reserve(want);
  for (std::size_t i = 0; i < want; ++i) {
    const int x = static_cast<int>(idx[i] % rm.width());
    const int y = static_cast<int>(idx[i] / rm.width());
    const double v = rm(x, y);
    if (v < p.low_threshold) continue;  // threshold applies after selection
    entries.push_back({{x, y}, v});
  }
  if (entries.empty()) {
    throw ConfigError("no samples survive low_threshold=" + std::to_string(p.low_threshold));
  }
  return SampleSet(rm.width(), rm.height(), std::move(entries));
}

Grid to_observation_grid(const SampleSet& s) {
  Grid g(s.width(), s.height());
  for (const auto& e : s.entries()) g(e.coord.x, e.coord.y) = e.value;
  return g;
}

SampleSet add_awgn(const SampleSet& s, double snr_db, std::uint64_t seed) {
  if (s.empty()) throw ConfigError("add_awgn: empty sample set");
  if (std::isinf(snr_db) && snr_db > 0) return s;
  double mean_sq = 0.0;
  for (const auto& e : s.entries()) mean_sq += e.value * e.value;
  mean_sq /= static_cast<double>(s.size());
  const double sigma = std::sqrt(mean_sq / std::pow(10.0, snr_db / 10.0));
  if (sigma == 0.0) return s;

  Rng rng(mix_seed(seed, 0xa39f00dULL));
  std::vector<Sample> noisy = s.entries();
  for (auto& e : noisy) e.value = std::clamp(e.value + sigma * rng.normal(), 0.0, 1.0);
  return SampleSet(s.width(), s.height(), std::move(noisy));
}

// ---------------------------------------------------------------------------
// Rasters

namespace {

std::vector<std::uint8_t> quantize_u8(const Grid& g) {
  std::vector<std::uint8_t> px(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = std::clamp(g.values()[i], 0.0, 1.0);
    px[i] = static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
  }
  return px;
}

Grid grid_from_u8(int w, int h, const std::vector<std::uint8_t>& px) {
  Grid g(w, h);
  for (std::size_t i = 0; i < px.size(); ++i) g.values()[i] = px[i] / 255.0;
  return g;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(),
                    [](char a, char b) { return std::tolower(a) == std::tolower(b); });
}

// ASCII PGM (P2) tokenizer that tracks the byte offset for error messages.
struct PgmReader {
  const std::string& buf;
  std::size_t pos = 0;

  void skip_space() {
    while (pos < buf.size()) {
      if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
        ++pos;
      } else if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  }

  long next_int(const char* what) {
    skip_space();
    if (pos >= buf.size()) {
      throw DataError(std::string("pgm: unexpected end of file while reading ") + what +
                      " at byte " + std::to_string(pos));
    }
    const std::size_t start = pos;
    long v = 0;
    bool any = false;
    while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) {
      v = v * 10 + (buf[pos] - '0');
      if (v > 1'000'000'000L) throw DataError("pgm: integer overflow at byte " + std::to_string(start));
      ++pos;
      any = true;
    }
    if (!any) {
      throw DataError(std::string("pgm: expected ") + what + " at byte " + std::to_string(start));
    }
    return v;
  }
};

Grid load_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open raster " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string buf = ss.str();
  if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '2') {
    throw DataError("pgm: bad magic at byte 0 in " + path + " (want ASCII \"P2\")");
  }
  PgmReader r{buf, 2};
  const long w = r.next_int("width");
  const long h = r.next_int("height");
  const long maxval = r.next_int("maxval");
  if (w <= 0 || h <= 0) throw DataError("pgm: non-positive dimensions in " + path);
  if (maxval != 255) throw DataError("pgm: maxval must be 255 in " + path);
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h);
  for (auto& v : px) {
    const long raw = r.next_int("pixel");
    if (raw < 0 || raw > 255) throw DataError("pgm: pixel out of range in " + path);
    v = static_cast<std::uint8_t>(raw);
  }
  return grid_from_u8(static_cast<int>(w), static_cast<int>(h), px);
}

void save_pgm(const Grid& g, const std::string& path) {
  const auto px = quantize_u8(g);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write raster " + path);
  f << "P2\n" << g.width() << ' ' << g.height() << "\n255\n";
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      if (x) f << ' ';
      f << static_cast<int>(px[static_cast<std::size_t>(y) * g.width() + x]);
    }
    f << '\n';
  }
  if (!f) throw DataError("short write to " + path);
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open raster " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                   std::istreambuf_iterator<char>());
}

}  // namespace

Grid load_raster(const std::string& path) {
  if (has_suffix(path, ".pgm")) return load_pgm(path);
  if (has_suffix(path, ".png")) {
    int w = 0, h = 0;
    std::vector<std::uint8_t> px;
    detail::decode_png_gray8(read_file_bytes(path), w, h, px);
    return grid_from_u8(w, h, px);
  }
  throw DataError("unsupported raster format (want .pgm or .png): " + path);
}

void save_raster(const Grid& g, const std::string& path) {
  if (has_suffix(path, ".pgm")) {
    save_pgm(g, path);
    return;
  }
  if (has_suffix(path, ".png")) {
    const auto bytes = detail::encode_png_gray8(g.width(), g.height(), quantize_u8(g));
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write raster " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("short write to " + path);
    return;
  }
  throw DataError("unsupported raster format (want .pgm or .png): " + path);
}

// ---------------------------------------------------------------------------
// Sample CSV

void save_samples_csv(const SampleSet& s, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError("cannot write " + path);
  std::fputs("x,y,value\n", f);
  for (const auto& e : s.entries()) {
    std::fprintf(f, "%d,%d,%.17g\n", e.coord.x, e.coord.y, e.value);
  }
  std::fclose(f);
}

SampleSet load_samples_csv(const std::string& path, int width, int height) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || (line != "x,y,value" && line != "x,y,value\r")) {
    throw DataError("sample csv missing \"x,y,value\" header: " + path);
  }
  std::vector<Sample> entries;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    Sample s;
    char extra = 0;
    if (std::sscanf(line.c_str(), "%d,%d,%lf%c", &s.coord.x, &s.coord.y, &s.value, &extra) < 3) {
      throw DataError("sample csv parse error at line " + std::to_string(lineno) + " in " + path);
    }
    entries.push_back(s);
  }
  return SampleSet(width, height, std::move(entries));
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw DataError("unknown key \"" + it.key() + "\" in " + where);
  }
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open manifest " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw DataError("manifest parse error in " + path + ": " + e.what());
  }
  if (!j.is_object()) throw DataError("manifest root must be an object: " + path);
  reject_unknown_keys(j, {"entries", "normalization"}, path);
  DatasetManifest m;
  if (!j.contains("entries") || !j["entries"].is_array()) {
    throw DataError("manifest needs an \"entries\" array: " + path);
  }
  for (const auto& je : j["entries"]) {
    reject_unknown_keys(je, {"gain", "buildings", "tx", "split"}, path + " entry");
    ManifestEntry e;
    e.gain = je.at("gain").get<std::string>();
    e.buildings = je.at("buildings").get<std::string>();
    e.split = je.at("split").get<std::string>();
    if (e.split != "train" && e.split != "val" && e.split != "test") {
      throw DataError("manifest split must be train|val|test, got \"" + e.split + "\"");
    }
    for (const auto& jt : je.at("tx")) {
      if (!jt.is_array() || jt.size() != 2) throw DataError("manifest tx must be [x,y] pairs");
      e.tx.push_back({jt[0].get<int>(), jt[1].get<int>()});
    }
    m.entries.push_back(std::move(e));
  }
  if (j.contains("normalization")) {
    reject_unknown_keys(j["normalization"], {"lo_db", "hi_db"}, path + " normalization");
    DbNormalization n;
    n.lo_db = j["normalization"].at("lo_db").get<double>();
    n.hi_db = j["normalization"].at("hi_db").get<double>();
    if (!(n.lo_db < n.hi_db)) throw DataError("manifest normalization needs lo_db < hi_db");
    m.normalization = n;
  }
  return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  json j;
  j["entries"] = json::array();
  for (const auto& e : m.entries) {
    json je;
    je["gain"] = e.gain;
    je["buildings"] = e.buildings;
    je["split"] = e.split;
    json tx = json::array();
    for (const auto& t : e.tx) tx.push_back({t.x, t.y});
    je["tx"] = std::move(tx);
    j["entries"].push_back(std::move(je));
  }
  if (m.normalization) {
    j["normalization"] = {{"lo_db", m.normalization->lo_db}, {"hi_db", m.normalization->hi_db}};
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write manifest " + path);
  f << j.dump(2) << '\n';
}

DatasetManifest split_dataset(const DatasetManifest& m, const std::array<double, 3>& fractions,
                              std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw ConfigError("split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1, got " + std::to_string(sum));
  }
  const std::size_t n = m.entries.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  Rng rng(mix_seed(seed, 0x59117ULL));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(order[i], order[j]);
  }
  const std::size_t n_val = static_cast<std::size_t>(std::floor(fractions[1] * static_cast<double>(n)));
  const std::size_t n_test = static_cast<std::size_t>(std::floor(fractions[2] * static_cast<double>(n)));
  const std::size_t n_train = n - n_val - n_test;  // remainder goes to train

  DatasetManifest out = m;
  for (std::size_t i = 0; i < n; ++i) {
    const char* split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
    out.entries[order[i]].split = split;
  }
  return out;
}

}  // namespace tire
