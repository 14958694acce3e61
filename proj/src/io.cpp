#include "dtj/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace dtj {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double_field(const std::string& field, int line_no, const char* col) {
  double v = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ParseError("line " + std::to_string(line_no) + ": invalid value in column " + col);
  }
  if (!std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line_no) + ": non-finite value in column " + col);
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

Dataset parse_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty dataset file: " + path.string());
  if (strip_cr(line) != "traj_id,t,x,y") {
    throw ParseError("line 1: expected header 'traj_id,t,x,y'");
  }

  std::vector<std::tuple<std::string, double, double, double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 4) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 4 fields, got " +
                       std::to_string(fields.size()));
    }
    if (fields[0].empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": empty traj_id");
    }
    rows.emplace_back(fields[0], parse_double_field(fields[1], line_no, "t"),
                      parse_double_field(fields[2], line_no, "x"),
                      parse_double_field(fields[3], line_no, "y"));
  }
  try {
    return Dataset::from_rows(rows);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write dataset file: " + path.string());
  out << "traj_id,t,x,y\n";
  for (const auto& tr : data.trajectories()) {
    for (const auto& p : tr.points) {
      out << data.id_name(tr.id) << ',' << format_double(p.t) << ',' << format_double(p.x) << ','
          << format_double(p.y) << '\n';
    }
  }
}

namespace {
constexpr char kPartMagic[4] = {'D', 'T', 'J', 'P'};
}

void write_part_file(const std::filesystem::path& path, std::span<const TrajectoryPoint> points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write part file: " + path.string());
  out.write(kPartMagic, 4);
  const std::uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), 4);
  const std::uint64_t count = points.size();
  out.write(reinterpret_cast<const char*>(&count), 8);
  for (const auto& p : points) {
    char rec[kPartRecordBytes];
    std::uint32_t traj = p.traj;
    std::uint32_t pad = 0;
    std::memcpy(rec, &traj, 4);
    std::memcpy(rec + 4, &pad, 4);
    std::memcpy(rec + 8, &p.t, 8);
    std::memcpy(rec + 16, &p.x, 8);
    std::memcpy(rec + 24, &p.y, 8);
    out.write(rec, kPartRecordBytes);
  }
}

std::vector<TrajectoryPoint> read_part_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open part file: " + path.string());
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t count = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&count), 8);
  if (!in || std::memcmp(magic, kPartMagic, 4) != 0 || version != 1) {
    throw ParseError("corrupt part file: " + path.string());
  }
  std::vector<TrajectoryPoint> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    char rec[kPartRecordBytes];
    in.read(rec, kPartRecordBytes);
    if (!in) throw ParseError("truncated part file: " + path.string());
    TrajectoryPoint p;
    std::uint32_t traj = 0;
    std::memcpy(&traj, rec, 4);
    std::memcpy(&p.t, rec + 8, 8);
    std::memcpy(&p.x, rec + 16, 8);
    std::memcpy(&p.y, rec + 24, 8);
    p.traj = traj;
    out.push_back(p);
  }
  return out;
}

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file for checksum: " + path.string());
  std::uint64_t h = 14695981039346656037ull;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

namespace {
std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}
}  // namespace

void DatasetManifest::save(const std::filesystem::path& path) const {
  json j;
  j["schema_version"] = schema_version;
  j["point_count"] = point_count;
  j["t_min"] = t_min;
  j["t_max"] = t_max;
  j["bbox"] = {bbox.x0, bbox.y0, bbox.x1, bbox.y1};
  j["m"] = m;
  j["k"] = k;
  j["seed"] = seed;
  j["sample_size"] = sample_size;
  j["boundaries"] = boundaries;
  j["id_table"] = id_table;
  json parts_j = json::array();
  for (const auto& p : parts) {
    parts_j.push_back({{"file", p.file},
                       {"count", p.count},
                       {"checksum", p.checksum},
                       {"base_lo", p.base_lo},
                       {"base_hi", p.base_hi},
                       {"group_id", p.group_id}});
  }
  j["parts"] = parts_j;
  if (has_quadtree) {
    json leaves = json::array();
    for (const auto& l : quadtree_leaves) {
      leaves.push_back({l.id, l.region.x0, l.region.y0, l.region.x1, l.region.y1});
    }
    j["quadtree"] = {{"threshold", quadtree_threshold}, {"leaves", leaves}};
  } else {
    j["quadtree"] = nullptr;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write manifest: " + path.string());
  out << j.dump(2) << '\n';
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("no manifest at " + path.string() +
                     "; run `dtj repartition` on the dataset first");
  }
  json j;
  in >> j;
  DatasetManifest m;
  m.schema_version = j.at("schema_version").get<int>();
  m.point_count = j.at("point_count").get<std::size_t>();
  m.t_min = j.at("t_min").get<double>();
  m.t_max = j.at("t_max").get<double>();
  const auto& bb = j.at("bbox");
  m.bbox = Rect{bb.at(0).get<double>(), bb.at(1).get<double>(), bb.at(2).get<double>(),
                bb.at(3).get<double>()};
  m.m = j.at("m").get<std::size_t>();
  m.k = j.at("k").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.sample_size = j.at("sample_size").get<std::size_t>();
  m.boundaries = j.at("boundaries").get<std::vector<double>>();
  m.id_table = j.at("id_table").get<std::vector<std::string>>();
  for (const auto& pj : j.at("parts")) {
    ManifestPart p;
    p.file = pj.at("file").get<std::string>();
    p.count = pj.at("count").get<std::size_t>();
    p.checksum = pj.at("checksum").get<std::string>();
    p.base_lo = pj.at("base_lo").get<double>();
    p.base_hi = pj.at("base_hi").get<double>();
    p.group_id = pj.at("group_id").get<int>();
    m.parts.push_back(std::move(p));
  }
  if (!j.at("quadtree").is_null()) {
    m.has_quadtree = true;
    m.quadtree_threshold = j["quadtree"].at("threshold").get<std::uint32_t>();
    for (const auto& lj : j["quadtree"].at("leaves")) {
      QuadTreeLeaf l;
      l.id = lj.at(0).get<std::uint32_t>();
      l.region = Rect{lj.at(1).get<double>(), lj.at(2).get<double>(), lj.at(3).get<double>(),
                      lj.at(4).get<double>()};
      m.quadtree_leaves.push_back(l);
    }
  }
  return m;
}

void DatasetManifest::verify_checksums(const std::filesystem::path& workdir) const {
  for (const auto& p : parts) {
    const auto actual = hex64(fnv1a_file(workdir / p.file));
    if (actual != p.checksum) {
      throw ParseError("checksum mismatch for " + p.file + "; workdir is stale or corrupt");
    }
  }
}

std::string checksum_of_file(const std::filesystem::path& file) {
  return hex64(fnv1a_file(file));
}

Dataset generate_dataset(const GenSpec& spec) {
  if (spec.n_traj == 0 || spec.points_per_traj == 0 || spec.duration <= 0.0) {
    throw std::invalid_argument("generate_dataset: sizes must be positive");
  }
  if (spec.group_size > spec.n_traj) {
    throw std::invalid_argument("generate_dataset: group size exceeds trajectory count");
  }
  if (spec.skew < 0.0 || spec.skew >= 1.0) {
    throw std::invalid_argument("generate_dataset: skew must be in [0, 1)");
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t g = std::max<std::size_t>(spec.group_size, 1);
  const std::size_t n_groups = (spec.n_traj + g - 1) / g;

  // Piecewise-linear paths: one shared path per group plus one detached path
  // per trajectory for the time outside the co-moving interval.
  constexpr int kWaypoints = 17;
  auto draw_path = [&]() {
    std::vector<std::pair<double, double>> w(kWaypoints);
    for (auto& p : w) p = {unit(rng) * spec.area, unit(rng) * spec.area};
    return w;
  };
  auto path_at = [&](const std::vector<std::pair<double, double>>& w, double t) {
    const double pos = std::clamp(t / spec.duration, 0.0, 1.0) * (kWaypoints - 1);
    const int seg = std::min(static_cast<int>(pos), kWaypoints - 2);
    const double frac = pos - seg;
    return std::pair<double, double>{w[seg].first + frac * (w[seg + 1].first - w[seg].first),
                                     w[seg].second + frac * (w[seg + 1].second - w[seg].second)};
  };

  // A group's shared path wanders slowly around an anchor: members jitter by
  // at most eps_sp/8 per coordinate and the path itself by the same bound, so
  // any two co-temporal group samples stay well inside eps_sp of each other.
  auto draw_group_path = [&]() {
    const double ax = unit(rng) * spec.area;
    const double ay = unit(rng) * spec.area;
    const double wobble = spec.eps_sp / 8.0;
    std::vector<std::pair<double, double>> w(kWaypoints);
    for (auto& p : w) {
      p = {ax + (unit(rng) * 2.0 - 1.0) * wobble, ay + (unit(rng) * 2.0 - 1.0) * wobble};
    }
    return w;
  };

  std::vector<std::vector<std::pair<double, double>>> group_paths(n_groups);
  std::vector<std::pair<double, double>> group_span(n_groups);
  const double span = std::clamp(spec.group_span_frac, 0.0, 1.0) * spec.duration;
  for (std::size_t gi = 0; gi < n_groups; ++gi) {
    group_paths[gi] = draw_group_path();
    const double start = unit(rng) * std::max(spec.duration - span, 0.0);
    group_span[gi] = {start, start + span};
  }

  const int width = std::max<int>(4, static_cast<int>(std::to_string(spec.n_traj - 1).size()));
  std::vector<std::tuple<std::string, double, double, double>> rows;
  rows.reserve(spec.n_traj * spec.points_per_traj);

  const double skew_edge = (1.0 - spec.skew) * spec.duration;
  const std::size_t skewed_count = static_cast<std::size_t>(
      std::ceil(spec.skew * static_cast<double>(spec.points_per_traj)));

  for (std::size_t ti = 0; ti < spec.n_traj; ++ti) {
    char name[32];
    std::snprintf(name, sizeof(name), "t%0*zu", width, ti);
    const std::size_t gi = ti / g;
    const bool grouped = g > 1;
    auto own_path = draw_path();

    std::vector<double> times(spec.points_per_traj);
    for (std::size_t k = 0; k < spec.points_per_traj; ++k) {
      if (spec.skew > 0.5 && k < skewed_count) {
        times[k] = unit(rng) * skew_edge;
      } else if (spec.skew > 0.5) {
        times[k] = skew_edge + unit(rng) * (spec.duration - skew_edge);
      } else {
        times[k] = unit(rng) * spec.duration;
      }
    }
    std::sort(times.begin(), times.end());
    for (std::size_t k = 1; k < times.size(); ++k) {
      if (times[k] <= times[k - 1]) times[k] = std::nextafter(times[k - 1], spec.duration * 2);
    }

    std::uniform_real_distribution<double> jitter(-spec.eps_sp / 8.0, spec.eps_sp / 8.0);
    for (double t : times) {
      std::pair<double, double> base;
      if (grouped && t >= group_span[gi].first && t <= group_span[gi].second) {
        base = path_at(group_paths[gi], t);
      } else {
        base = path_at(own_path, t);
      }
      rows.emplace_back(name, t, base.first + jitter(rng), base.second + jitter(rng));
    }
  }
  return Dataset::from_rows(rows);
}

std::vector<ResultRow> rows_from_match_pairs(const Dataset& data,
                                             const std::vector<MatchPair>& pairs) {
  std::vector<ResultRow> rows;
  rows.reserve(pairs.size());
  for (const auto& mp : pairs) {
    const auto& a = data.trajectory(mp.sub_r.traj);
    const auto& b = data.trajectory(mp.sub_s.traj);
    rows.push_back(ResultRow{data.id_name(mp.sub_r.traj), a.points[mp.sub_r.start_idx].t,
                             a.points[mp.sub_r.end_idx].t, data.id_name(mp.sub_s.traj),
                             b.points[mp.sub_s.start_idx].t, b.points[mp.sub_s.end_idx].t});
  }
  return rows;
}

std::vector<std::string> result_lines(const std::vector<ResultRow>& rows) {
  std::vector<std::string> lines;
  lines.reserve(rows.size());
  for (const auto& r : rows) {
    lines.push_back(r.a + ',' + format_double(r.a_t0) + ',' + format_double(r.a_t1) + ',' + r.b +
                    ',' + format_double(r.b_t0) + ',' + format_double(r.b_t1));
  }
  std::sort(lines.begin(), lines.end());
  return lines;
}

void write_result_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write results: " + path.string());
  out << "traj_a,start_t_a,end_t_a,traj_b,start_t_b,end_t_b\n";
  for (const auto& line : result_lines(rows)) out << line << '\n';
}

}  // namespace dtj
