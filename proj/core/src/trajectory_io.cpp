// SPDX-License-Identifier: Apache-2.0
#include <idmf/error.hpp>
#include <idmf/trajectory_io.hpp>

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace idmf {

namespace {

std::string format_number(double x) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
  return std::string(buf, static_cast<std::size_t>(n));
}

double parse_number(const std::string &cell, std::size_t line,
                    const char *column) {
  double value = 0.0;
  const char *first = cell.data();
  const char *last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || cell.empty())
    throw ParseError("line " + std::to_string(line) + ": column '" + column +
                       "' is not a number: '" + cell + "'",
                     line);
  return value;
}

std::vector<std::string> split_row(const std::string &row) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(row);
  while (std::getline(ss, cell, ','))
    cells.push_back(cell);
  if (!row.empty() && row.back() == ',')
    cells.emplace_back();
  return cells;
}

constexpr const char *kHeader = "t,pair_id,s_lead,v_lead,s_follow";
constexpr const char *kHeaderWithFollowerSpeed =
  "t,pair_id,s_lead,v_lead,s_follow,v_follow";

} // namespace

void write_pairs_csv(std::ostream &out,
                     std::span<const TrajectoryPair> pairs) {
  bool follower_speed = !pairs.empty();
  for (const auto &p : pairs)
    follower_speed = follower_speed && p.follower.has_velocities();
  out << (follower_speed ? kHeaderWithFollowerSpeed : kHeader) << '\n';
  for (const auto &p : pairs) {
    validate_structure(p);
    if (p.pair_id.find_first_of(",\n\r") != std::string::npos)
      throw InputError("pair_id may not contain commas or newlines: '" +
                       p.pair_id + "'");
    for (std::size_t k = 0; k < p.size(); ++k) {
      out << format_number(static_cast<double>(k) * p.dt()) << ','
          << p.pair_id << ',' << format_number(p.leader.positions[k]) << ','
          << format_number(p.leader.velocities[k]) << ','
          << format_number(p.follower.positions[k]);
      if (follower_speed)
        out << ',' << format_number(p.follower.velocities[k]);
      out << '\n';
    }
  }
}

std::vector<TrajectoryPair> read_pairs_csv(std::istream &in) {
  std::string row;
  std::size_t line = 0;
  if (!std::getline(in, row))
    throw ParseError("missing header row", 1);
  ++line;
  if (!row.empty() && row.back() == '\r')
    row.pop_back();
  const bool follower_speed = row == kHeaderWithFollowerSpeed;
  if (row != kHeader && !follower_speed)
    throw ParseError("line 1: unexpected header '" + row + "'", 1);
  const std::size_t columns = follower_speed ? 6 : 5;

  struct Accum {
    std::vector<double> t;
    TrajectoryPair pair;
  };
  std::vector<Accum> accums;
  std::unordered_map<std::string, std::size_t> index;

  while (std::getline(in, row)) {
    ++line;
    if (!row.empty() && row.back() == '\r')
      row.pop_back();
    if (row.empty())
      continue;
    const auto cells = split_row(row);
    if (cells.size() != columns)
      throw ParseError("line " + std::to_string(line) + ": expected " +
                         std::to_string(columns) + " cells, got " +
                         std::to_string(cells.size()),
                       line);
    const double t = parse_number(cells[0], line, "t");
    const std::string &id = cells[1];
    const double s_lead = parse_number(cells[2], line, "s_lead");
    const double v_lead = parse_number(cells[3], line, "v_lead");
    const double s_follow = parse_number(cells[4], line, "s_follow");

    auto [it, inserted] = index.try_emplace(id, accums.size());
    if (inserted) {
      accums.emplace_back();
      accums.back().pair.pair_id = id;
    }
    Accum &acc = accums[it->second];
    acc.t.push_back(t);
    acc.pair.leader.positions.push_back(s_lead);
    acc.pair.leader.velocities.push_back(v_lead);
    acc.pair.follower.positions.push_back(s_follow);
    if (follower_speed)
      acc.pair.follower.velocities.push_back(
        parse_number(cells[5], line, "v_follow"));
  }

  std::vector<TrajectoryPair> pairs;
  pairs.reserve(accums.size());
  for (auto &acc : accums) {
    if (acc.t.size() < 2)
      throw ParseError("pair '" + acc.pair.pair_id +
                       "' has fewer than 2 samples");
    const double dt = acc.t[1] - acc.t[0];
    acc.pair.leader.dt = dt;
    acc.pair.follower.dt = dt;
    acc.pair.leader.vehicle_id = acc.pair.pair_id + ":lead";
    acc.pair.follower.vehicle_id = acc.pair.pair_id + ":follow";
    validate_structure(acc.pair);
    pairs.push_back(std::move(acc.pair));
  }
  return pairs;
}

void save_csv(std::span<const TrajectoryPair> pairs,
              const std::filesystem::path &path) {
  std::ostringstream out;
  write_pairs_csv(out, pairs);
  write_text_file(path, out.str());
}

std::vector<TrajectoryPair> load_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw InputError("cannot open '" + path.string() + "'");
  return read_pairs_csv(in);
}

std::string to_json(const DatasetManifest &m) {
  nlohmann::ordered_json j;
  j["dt"] = m.dt;
  j["horizon"] = m.horizon;
  j["stride"] = m.stride;
  j["gap_threshold"] = m.gap_threshold;
  j["seed"] = m.seed;
  j["split_ratios"] = {m.ratios.train, m.ratios.validation, m.ratios.test};
  j["pair_count"] = m.pair_count;
  j["windows"] = {{"train", m.train_windows},
                  {"validation", m.validation_windows},
                  {"test", m.test_windows}};
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string &text) {
  try {
    const auto j = nlohmann::json::parse(text);
    DatasetManifest m;
    m.dt = j.at("dt").get<double>();
    m.horizon = j.at("horizon").get<std::size_t>();
    m.stride = j.at("stride").get<std::size_t>();
    m.gap_threshold = j.at("gap_threshold").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto &r = j.at("split_ratios");
    m.ratios = {r.at(0).get<double>(), r.at(1).get<double>(),
                r.at(2).get<double>()};
    m.pair_count = j.at("pair_count").get<std::size_t>();
    const auto &w = j.at("windows");
    m.train_windows = w.at("train").get<std::size_t>();
    m.validation_windows = w.at("validation").get<std::size_t>();
    m.test_windows = w.at("test").get<std::size_t>();
    return m;
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

void save_manifest(const DatasetManifest &manifest,
                   const std::filesystem::path &path) {
  write_text_file(path, to_json(manifest));
}

DatasetManifest load_manifest(const std::filesystem::path &path) {
  return manifest_from_json(read_text_file(path));
}

void write_text_file(const std::filesystem::path &path,
                     const std::string &text) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw InputError("cannot write '" + path.string() + "'");
  out << text;
  if (!out)
    throw InputError("write failed for '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace idmf
