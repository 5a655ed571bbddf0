#include "rxbench/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "rxbench/error.hpp"
#include "rxbench/random.hpp"

namespace rxbench::datagen {

namespace fs = std::filesystem;

namespace {

Trajectory slice(const Trajectory& traj, std::size_t first, std::size_t last) {
  Trajectory out;
  out.dt = traj.dt;
  out.vehicle_length = traj.vehicle_length;
  out.vehicle_width = traj.vehicle_width;
  out.points.assign(traj.points.begin() + static_cast<std::ptrdiff_t>(first),
                    traj.points.begin() + static_cast<std::ptrdiff_t>(last) + 1);
  return out;
}

int lane_id(double y, double width, double lane_width) {
  return std::abs(y) + 0.5 * width <= 0.5 * lane_width + 1e-9 ? 1 : 2;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void parse_fail(std::size_t row, const std::string& column, const std::string& what) {
  throw Error(ErrorKind::ParseError,
              "row " + std::to_string(row) + (column.empty() ? "" : " column " + column) + ": " + what);
}

double parse_double(const std::string& text, std::size_t row, const std::string& column) {
  if (text.empty()) parse_fail(row, column, "empty field");
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || !std::isfinite(value)) {
    parse_fail(row, column, "not a finite number: '" + text + "'");
  }
  return value;
}

long parse_long(const std::string& text, std::size_t row, const std::string& column) {
  if (text.empty()) parse_fail(row, column, "empty field");
  char* end = nullptr;
  const long value = std::strtol(text.c_str(), &end, 10);
  if (end != text.c_str() + text.size()) parse_fail(row, column, "not an integer: '" + text + "'");
  return value;
}

struct CsvRow {
  std::size_t row = 0;
  double t = 0.0, x = 0.0, y = 0.0, v = 0.0, a = 0.0, length = 0.0, width = 0.0;
  int lane = 0;
};

struct VehicleRows {
  long id = 0;
  std::vector<CsvRow> rows;
};

const char* const kColumns[] = {"vehicle_id", "t", "x", "y", "v", "a", "length", "width", "lane_id", "unit"};

int episode_id_from_name(const fs::path& path) {
  const std::string stem = path.stem().string();
  const auto pos = stem.find_last_of('_');
  if (pos == std::string::npos) return 0;
  char* end = nullptr;
  const std::string digits = stem.substr(pos + 1);
  const long id = std::strtol(digits.c_str(), &end, 10);
  return (!digits.empty() && *end == '\0') ? static_cast<int>(id) : 0;
}

// Linear interpolation of one vehicle's rows at time t (rows sorted, t inside the span).
TrajectoryPoint sample_at(const std::vector<CsvRow>& rows, double t, int& lane) {
  auto it = std::lower_bound(rows.begin(), rows.end(), t,
                             [](const CsvRow& r, double value) { return r.t < value; });
  if (it == rows.end()) it = rows.end() - 1;
  if (std::abs(it->t - t) <= 1e-9 || it == rows.begin()) {
    lane = it->lane;
    return {t, it->x, it->v, it->a, it->y};
  }
  const CsvRow& hi = *it;
  const CsvRow& lo = *(it - 1);
  const double f = (t - lo.t) / (hi.t - lo.t);
  lane = lo.lane;
  auto mix = [f](double p, double q) { return p + f * (q - p); };
  return {t, mix(lo.x, hi.x), mix(lo.v, hi.v), mix(lo.a, hi.a), mix(lo.y, hi.y)};
}

}  // namespace

std::vector<SceneSample> window_samples(const Episode& episode, const ScenarioConfig& config,
                                        std::span<const MotionPattern> patterns,
                                        const protogen::PlannerLimits& limits) {
  config.validate();
  const auto host_it = episode.trajectories.find(kHostEntity);
  const auto target_it = episode.trajectories.find(kTargetEntity);
  if (host_it == episode.trajectories.end() || target_it == episode.trajectories.end()) {
    throw Error(ErrorKind::InvalidArgument, "episode needs host and target trajectories");
  }
  const std::size_t n = host_it->second.size();
  for (const auto& [entity, traj] : episode.trajectories) {
    if (traj.size() != n) {
      throw Error(ErrorKind::DimensionMismatch,
                  "entity " + std::to_string(entity) + " does not share the episode time base");
    }
  }
  const std::size_t hist = config.steps(config.t_hist);
  const std::size_t fut = config.steps(config.t_h);
  const std::size_t stride = config.steps(config.sample_stride);
  if (n == 0 || n - 1 < hist + fut) {
    throw Error(ErrorKind::EpisodeTooShort,
                "episode " + std::to_string(episode.id) + " is shorter than history plus horizon");
  }

  std::vector<SceneSample> out;
  int window = 0;
  for (std::size_t start = 0; start + hist + fut <= n - 1; start += stride, ++window) {
    const std::size_t now = start + hist;
    const double t0 = host_it->second.points[now].t;
    if (episode.merge_success_time && t0 >= *episode.merge_success_time - 1e-9) break;
    SceneSample s;
    s.sample_id = episode.id * 1000 + window;
    s.episode_id = episode.id;
    s.t0 = t0;
    s.horizon = config.t_h;
    for (const auto& [entity, traj] : episode.trajectories) s.history[entity] = slice(traj, start, now);
    s.future_host = slice(host_it->second, now, now + fut);
    s.future_predicted = slice(target_it->second, now, now + fut);
    if (const auto f = episode.trajectories.find(kFrontEntity); f != episode.trajectories.end()) {
      s.future_front = slice(f->second, now, now + fut);
    }
    s.situation = episode.host_merged_ahead ? 1 : 2;
    const auto protos = protogen::generate_prototypes(s, patterns, limits);
    s.gt_pattern = protogen::label_ground_truth(s, protos);
    out.push_back(std::move(s));
  }
  return out;
}

void write_episode_csv(const Episode& episode, const fs::path& path, double lane_width) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "vehicle_id,t,x,y,v,a,length,width,lane_id,unit\n";
  char buf[512];
  for (const auto& [entity, traj] : episode.trajectories) {
    for (const auto& p : traj.points) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,m\n", entity + 1, p.t,
                    p.x, p.y, p.v, p.a, traj.vehicle_length, traj.vehicle_width,
                    lane_id(p.y, traj.vehicle_width, lane_width));
      out << buf;
    }
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

std::vector<Episode> ingest_csv(const fs::path& path, double dt, const RoleMap& roles) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) parse_fail(1, "", "missing header");
  const auto header = split_fields(line);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* name : kColumns) {
    if (!col.count(name)) parse_fail(1, name, "missing column");
  }

  std::vector<VehicleRows> vehicles;
  std::unordered_map<long, std::size_t> vehicle_index;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != header.size()) {
      parse_fail(row, "", "expected " + std::to_string(header.size()) + " fields, found " +
                              std::to_string(f.size()));
    }
    const std::string& unit = f[col["unit"]];
    double scale = 1.0;
    if (unit == "ft") {
      scale = kFeetToMeters;
    } else if (unit != "m") {
      parse_fail(row, "unit", "unit must be m or ft, found '" + unit + "'");
    }
    CsvRow r;
    r.row = row;
    const long id = parse_long(f[col["vehicle_id"]], row, "vehicle_id");
    r.t = parse_double(f[col["t"]], row, "t");
    r.x = scale * parse_double(f[col["x"]], row, "x");
    r.y = scale * parse_double(f[col["y"]], row, "y");
    r.v = scale * parse_double(f[col["v"]], row, "v");
    r.a = scale * parse_double(f[col["a"]], row, "a");
    r.length = scale * parse_double(f[col["length"]], row, "length");
    r.width = scale * parse_double(f[col["width"]], row, "width");
    r.lane = static_cast<int>(parse_long(f[col["lane_id"]], row, "lane_id"));
    if (std::abs(r.v) > kMaxPlausibleSpeed) {
      throw Error(ErrorKind::UnitError, "row " + std::to_string(row) + ": speed " + std::to_string(r.v) +
                                            " m/s is implausible; check the unit column");
    }
    if (r.v < 0.0) parse_fail(row, "v", "negative speed");
    if (!(r.length > 0.0) || !(r.width > 0.0)) parse_fail(row, "length", "vehicle size must be positive");
    auto [it, inserted] = vehicle_index.emplace(id, vehicles.size());
    if (inserted) vehicles.push_back({id, {}});
    vehicles[it->second].rows.push_back(r);
  }
  if (vehicles.empty()) parse_fail(row, "", "no data rows");

  double t_start = -INFINITY, t_end = INFINITY;
  for (auto& veh : vehicles) {
    auto& rows = veh.rows;
    std::stable_sort(rows.begin(), rows.end(), [](const CsvRow& a, const CsvRow& b) { return a.t < b.t; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].t - rows[i - 1].t <= 1e-9) parse_fail(rows[i].row, "t", "duplicate timestamp");
    }
    if (rows.size() >= 3) {
      std::vector<double> steps;
      for (std::size_t i = 1; i < rows.size(); ++i) steps.push_back(rows[i].t - rows[i - 1].t);
      std::nth_element(steps.begin(), steps.begin() + static_cast<std::ptrdiff_t>(steps.size() / 2), steps.end());
      const double typical = steps[steps.size() / 2];
      for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].t - rows[i - 1].t > 1.5 * typical + 1e-9) {
          parse_fail(rows[i].row, "t", "missing timestamp rows before this row");
        }
      }
    }
    t_start = std::max(t_start, rows.front().t);
    t_end = std::min(t_end, rows.back().t);
  }
  const auto n_steps = static_cast<long>(std::floor((t_end - t_start) / dt + 1e-9));
  if (n_steps < 1) parse_fail(row, "t", "vehicles share fewer than two timestamps");

  Episode ep;
  ep.id = episode_id_from_name(path);
  std::map<int, std::vector<int>> lanes;
  int next_entity = 0;
  for (const auto& veh : vehicles) {
    int entity = next_entity++;
    if (!roles.empty()) {
      const auto r = roles.find(veh.id);
      if (r == roles.end()) continue;  // vehicles without a role are not part of the scene
      entity = r->second;
    }
    Trajectory traj;
    traj.dt = dt;
    traj.vehicle_length = veh.rows.front().length;
    traj.vehicle_width = veh.rows.front().width;
    auto& lane_seq = lanes[entity];
    for (long k = 0; k <= n_steps; ++k) {
      const double t = t_start + static_cast<double>(k) * dt;
      int lane = 0;
      traj.points.push_back(sample_at(veh.rows, t, lane));
      lane_seq.push_back(lane);
    }
    ep.trajectories[entity] = std::move(traj);
  }

  const auto host = ep.trajectories.find(kHostEntity);
  const auto target = ep.trajectories.find(kTargetEntity);
  if (host != ep.trajectories.end() && target != ep.trajectories.end()) {
    const auto& lh = lanes[kHostEntity];
    const auto& lt = lanes[kTargetEntity];
    for (std::size_t k = 0; k < lh.size(); ++k) {
      if (lh[k] == lt[k]) {
        ep.merge_success_time = host->second.points[k].t;
        ep.host_merged_ahead = host->second.points[k].x > target->second.points[k].x;
        break;
      }
    }
  }
  return {std::move(ep)};
}

SplitResult split(std::span<const SceneSample> samples, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "train_fraction must lie in (0, 1)");
  }
  std::set<int> unique;
  for (const auto& s : samples) unique.insert(s.episode_id);
  std::vector<int> episodes(unique.begin(), unique.end());
  const auto n = episodes.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) {
    throw Error(ErrorKind::TooFewEpisodes,
                std::to_string(n) + " episodes cannot be split with fraction " + std::to_string(train_fraction));
  }
  std::mt19937_64 rng(splitmix64(seed));
  shuffle_in_place(episodes, rng);
  const std::set<int> train_ids(episodes.begin(), episodes.begin() + static_cast<std::ptrdiff_t>(n_train));
  SplitResult out;
  for (const auto& s : samples) (train_ids.count(s.episode_id) ? out.train : out.test).push_back(s);
  return out;
}

void write_dataset(const fs::path& dir, const ScenarioConfig& scenario, std::span<const Episode> episodes,
                   const nlohmann::json& extra) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json list = nlohmann::json::array();
  for (const auto& ep : episodes) {
    const std::string file = "episode_" + std::to_string(ep.id) + ".csv";
    write_episode_csv(ep, dir / file, scenario.lane_width);
    nlohmann::json e = {{"id", ep.id}, {"file", file}, {"aborted", ep.aborted},
                        {"host_merged_ahead", ep.host_merged_ahead}};
    e["yield_param"] = ep.yield_param ? nlohmann::json(*ep.yield_param) : nlohmann::json(nullptr);
    e["yield_onset_time"] = ep.yield_onset_time ? nlohmann::json(*ep.yield_onset_time) : nlohmann::json(nullptr);
    e["merge_success_time"] =
        ep.merge_success_time ? nlohmann::json(*ep.merge_success_time) : nlohmann::json(nullptr);
    list.push_back(std::move(e));
  }
  nlohmann::json manifest = {
      {"format", "rxbench-dataset"},
      {"version", 1},
      {"dt", scenario.dt},
      {"speed_limit", scenario.speed_limit},
      {"ramp_end_x", scenario.ramp_end_x},
      {"roles", {{"1", "host"}, {"2", "target"}, {"3", "front"}}},
      {"scenario", to_json(scenario)},
      {"config", extra},
      {"episodes", std::move(list)},
  };
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error(ErrorKind::Io, "cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + manifest_path.string());
  Dataset ds;
  try {
    ds.manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, manifest_path.string() + ": " + e.what());
  }
  try {
    ds.scenario = scenario_from_json(ds.manifest.at("scenario"));
    RoleMap roles;
    for (const auto& [key, value] : ds.manifest.at("roles").items()) {
      const std::string role = value.get<std::string>();
      const int entity = role == "host" ? kHostEntity : role == "target" ? kTargetEntity
                         : role == "front" ? kFrontEntity : -1;
      if (entity < 0) throw Error(ErrorKind::ParseError, "unknown role '" + role + "'");
      roles[std::stol(key)] = entity;
    }
    for (const auto& e : ds.manifest.at("episodes")) {
      auto eps = ingest_csv(dir / e.at("file").get<std::string>(), ds.scenario.dt, roles);
      Episode ep = std::move(eps.front());
      ep.id = e.at("id").get<int>();
      ep.aborted = e.value("aborted", false);
      ep.host_merged_ahead = e.value("host_merged_ahead", ep.host_merged_ahead);
      auto opt = [&](const char* key) -> std::optional<double> {
        if (!e.contains(key) || e.at(key).is_null()) return std::nullopt;
        return e.at(key).get<double>();
      };
      ep.yield_param = opt("yield_param");
      ep.yield_onset_time = opt("yield_onset_time");
      if (e.contains("merge_success_time")) ep.merge_success_time = opt("merge_success_time");
      ds.episodes.push_back(std::move(ep));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, manifest_path.string() + ": " + e.what());
  }
  return ds;
}

}  // namespace rxbench::datagen
