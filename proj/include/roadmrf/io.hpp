#ifndef ROADMRF_IO_HPP
#define ROADMRF_IO_HPP

#include <charconv>
#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "roadmrf/common.hpp"
#include "roadmrf/gmrf.hpp"
#include "roadmrf/graph.hpp"
#include "roadmrf/reconstruct.hpp"

namespace roadmrf {

// --- number rendering -------------------------------------------------------
// All file output goes through these two so results are locale-independent
// and byte-identical across runs.

/// Shortest representation that round-trips exactly.
inline std::string fmt_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Six significant digits, the CSV rendering contract.
inline std::string fmt_double6(double v) {
  char buf[48];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 6);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view token, const std::string& context) {
  const std::size_t b = token.find_first_not_of(" \t\r");
  const std::size_t e = token.find_last_not_of(" \t\r");
  if (b == std::string_view::npos) throw ValidationError(context + ": empty numeric field");
  token = token.substr(b, e - b + 1);
  double value = 0.0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), value);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size())
    throw ValidationError(context + ": cannot parse number '" + std::string(token) + "'");
  return value;
}

// --- file helpers ------------------------------------------------------------

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r')
    fields.back().pop_back();
  return fields;
}

inline void check_csv_safe_id(const std::string& id) {
  if (id.empty() || id.find_first_of(",\n\r") != std::string::npos)
    throw ValidationError("road id '" + id + "' cannot be rendered in CSV");
}

// --- network JSON ------------------------------------------------------------
// {"vertices": ["id", ...], "edges": [["id","id"], ...]}; vertices optional
// on input (ids may be implied by edges), always written on output.

inline std::string json_id(const nlohmann::json& j, const std::string& context) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  if (j.is_number_unsigned()) return std::to_string(j.get<unsigned long long>());
  throw ValidationError(context + ": road ids must be strings or integers");
}

inline RoadGraph read_network_json(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("network file '" + path + "': " + e.what());
  }
  if (!doc.is_object() || !doc.contains("edges") || !doc["edges"].is_array())
    throw ValidationError("network file '" + path + "': expected object with an 'edges' array");
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& e : doc["edges"]) {
    if (!e.is_array() || e.size() != 2)
      throw ValidationError("network file '" + path + "': each edge must be a pair");
    pairs.emplace_back(json_id(e[0], path), json_id(e[1], path));
  }
  std::vector<std::string> declared;
  if (doc.contains("vertices")) {
    if (!doc["vertices"].is_array())
      throw ValidationError("network file '" + path + "': 'vertices' must be an array");
    for (const auto& v : doc["vertices"]) declared.push_back(json_id(v, path));
  }
  return build_graph(pairs, declared);
}

inline void write_network_json(const RoadGraph& g, const std::string& path) {
  nlohmann::ordered_json doc;
  doc["vertices"] = g.labels();
  auto& edges = doc["edges"] = nlohmann::ordered_json::array();
  for (const auto& [i, j] : g.edges())
    edges.push_back(nlohmann::ordered_json::array({g.label(i), g.label(j)}));
  write_file(path, doc.dump(2) + "\n");
}

// --- model JSON ---------------------------------------------------------------

inline void write_model_json(const Model& m, const std::string& path) {
  nlohmann::ordered_json doc;
  doc["format_version"] = 1;
  doc["eta"] = m.eta;
  doc["epsilon"] = m.epsilon;
  doc["lambda"] = m.lambda_used;
  doc["graph_fingerprint"] = m.graph_fingerprint;
  doc["beta"] = m.beta;
  write_file(path, doc.dump(2) + "\n");
}

inline Model read_model_json(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("model file '" + path + "': " + e.what());
  }
  if (!doc.is_object()) throw ValidationError("model file '" + path + "': expected an object");
  if (!doc.contains("format_version") || doc["format_version"] != 1)
    throw ValidationError("model file '" + path + "': unsupported format_version");
  Model m;
  try {
    m.eta = doc.at("eta").get<double>();
    m.epsilon = doc.at("epsilon").get<double>();
    m.lambda_used = doc.at("lambda").get<double>();
    m.graph_fingerprint = doc.at("graph_fingerprint").get<std::string>();
    m.beta = doc.at("beta").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file '" + path + "': " + e.what());
  }
  if (!(m.eta > 0.0) || !(m.epsilon > 0.0) || m.lambda_used < 0.0)
    throw ValidationError("model file '" + path + "': eta/epsilon/lambda out of range");
  for (double b : m.beta)
    if (!std::isfinite(b)) throw ValidationError("model file '" + path + "': non-finite beta");
  return m;
}

// --- snapshot CSV (historical data) -------------------------------------------
// Header "road_<id>,..." in label order; one row per complete snapshot.

inline void write_snapshots_csv(const RoadGraph& g, std::span<const Snapshot> snapshots,
                                const std::string& path) {
  std::string out;
  for (int v = 0; v < g.vertex_count(); ++v) {
    check_csv_safe_id(g.label(v));
    out += (v == 0 ? "road_" : ",road_") + g.label(v);
  }
  out += '\n';
  for (const Snapshot& s : snapshots) {
    if (static_cast<int>(s.size()) != g.vertex_count())
      throw ValidationError("snapshot length does not match vertex count");
    for (int v = 0; v < g.vertex_count(); ++v) {
      if (v) out += ',';
      out += fmt_double(s[v]);
    }
    out += '\n';
  }
  write_file(path, out);
}

inline std::vector<Snapshot> read_snapshots_csv(const RoadGraph& g, const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("snapshot file '" + path + "' is empty");
  const auto header = split_csv_line(line);
  const int n = g.vertex_count();
  if (static_cast<int>(header.size()) != n)
    throw ValidationError("snapshot file '" + path + "': expected " + std::to_string(n) +
                          " columns, found " + std::to_string(header.size()));
  std::vector<int> column_vertex(header.size());
  std::vector<std::uint8_t> seen(n, 0);
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string_view name = header[c];
    if (name.rfind("road_", 0) != 0)
      throw ValidationError("snapshot file '" + path + "': column '" + header[c] +
                            "' lacks the road_ prefix");
    const int v = g.require_index(name.substr(5));
    if (seen[v]) throw ValidationError("snapshot file '" + path + "': duplicate column");
    seen[v] = 1;
    column_vertex[c] = v;
  }
  std::vector<Snapshot> snapshots;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw ValidationError("snapshot file '" + path + "' row " + std::to_string(row) +
                            ": wrong field count");
    Snapshot s(n);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const double value = parse_double(fields[c], path + " row " + std::to_string(row));
      if (!std::isfinite(value))
        throw ValidationError(path + " row " + std::to_string(row) + ": non-finite value");
      s[column_vertex[c]] = value;
    }
    snapshots.push_back(std::move(s));
  }
  if (snapshots.empty()) throw ValidationError("snapshot file '" + path + "' has no data rows");
  return snapshots;
}

// --- partial snapshot CSV ------------------------------------------------------
// Rows "id,value". A road absent from the file is unobserved; an empty value
// field marks a road explicitly unobserved. Optional "road_id,value" header.

inline PartialSnapshot read_partial_csv(const RoadGraph& g, const std::string& path) {
  std::istringstream in(read_file(path));
  const int n = g.vertex_count();
  std::vector<double> values(n, 0.0);
  std::vector<std::uint8_t> mask(n, 0), seen(n, 0);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (row == 1 && fields.size() >= 1 && fields[0] == "road_id") continue;
    if (fields.size() != 2)
      throw ValidationError(path + " row " + std::to_string(row) + ": expected 'id,value'");
    const int v = g.require_index(fields[0]);
    if (seen[v])
      throw ValidationError(path + ": duplicate entry for road '" + fields[0] + "'");
    seen[v] = 1;
    const std::size_t content = fields[1].find_first_not_of(" \t\r");
    if (content == std::string::npos) continue;  // explicitly unobserved
    values[v] = parse_double(fields[1], path + " row " + std::to_string(row));
    mask[v] = 1;
  }
  return PartialSnapshot(std::move(values), std::move(mask));
}

inline void write_partial_csv(const RoadGraph& g, const PartialSnapshot& s,
                              const std::string& path) {
  std::string out = "road_id,value\n";
  for (int v = 0; v < g.vertex_count(); ++v) {
    if (!s.is_observed(v)) continue;
    check_csv_safe_id(g.label(v));
    out += g.label(v) + ',' + fmt_double(s.value(v)) + '\n';
  }
  write_file(path, out);
}

// --- reconstruction CSV ---------------------------------------------------------

inline void write_reconstruction_csv(const RoadGraph& g, const ReconstructionResult& r,
                                     const PartialSnapshot& s, const std::string& path) {
  std::string out = "road_id,estimate,observed\n";
  for (int v = 0; v < g.vertex_count(); ++v) {
    check_csv_safe_id(g.label(v));
    out += g.label(v) + ',' + fmt_double6(r.estimates[v]) + ',' +
           (s.is_observed(v) ? '1' : '0') + '\n';
  }
  write_file(path, out);
}

struct ReconstructionRow {
  std::string road_id;
  double estimate = 0.0;
  bool observed = false;
};

inline std::vector<ReconstructionRow> read_reconstruction_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) !=
      std::vector<std::string>{"road_id", "estimate", "observed"})
    throw ValidationError(path + ": expected header 'road_id,estimate,observed'");
  std::vector<ReconstructionRow> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3)
      throw ValidationError(path + " row " + std::to_string(row) + ": expected three fields");
    ReconstructionRow r;
    r.road_id = fields[0];
    r.estimate = parse_double(fields[1], path + " row " + std::to_string(row));
    if (fields[2] == "1")
      r.observed = true;
    else if (fields[2] == "0")
      r.observed = false;
    else
      throw ValidationError(path + " row " + std::to_string(row) + ": observed must be 0 or 1");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace roadmrf

#endif  // ROADMRF_IO_HPP
