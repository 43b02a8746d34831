#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "mfaoa/dynamics.hpp"
#include "mfaoa/error.hpp"
#include "mfaoa/problem.hpp"

namespace mfaoa {

using json = nlohmann::ordered_json;

inline constexpr int instance_format_version = 1;

/// Instance document: couplings stored as the strictly lower triangle, row-major
/// (J_10, J_20, J_21, J_30, ...), n(n-1)/2 entries.
inline json instance_to_json(const IsingProblem& problem) {
  const auto n = static_cast<Eigen::Index>(problem.n());
  json doc;
  doc["format_version"] = instance_format_version;
  doc["kind"] = to_string(problem.kind());
  doc["n"] = problem.n();
  if (problem.seed()) doc["seed"] = *problem.seed();
  json lower = json::array();
  for (Eigen::Index i = 1; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j) lower.push_back(problem.couplings()(i, j));
  doc["J"] = std::move(lower);
  doc["h"] = std::vector<double>(problem.fields().data(), problem.fields().data() + n);
  doc["delta"] = std::vector<double>(problem.driver().data(), problem.driver().data() + n);
  doc["offset"] = problem.energy_offset();
  return doc;
}

inline IsingProblem instance_from_json(const json& doc) {
  try {
    if (doc.at("format_version").get<int>() != instance_format_version)
      throw error(errc::io, "unsupported instance format_version");
    const auto n = doc.at("n").get<Eigen::Index>();
    if (n < 1) throw error(errc::invalid_instance, "n must be >= 1");
    const auto& lower = doc.at("J");
    if (static_cast<Eigen::Index>(lower.size()) != n * (n - 1) / 2)
      throw error(errc::dimension_mismatch, "J must hold n(n-1)/2 lower-triangle entries");
    RowMatrix J = RowMatrix::Zero(n, n);
    std::size_t idx = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      for (Eigen::Index j = 0; j < i; ++j) J(i, j) = J(j, i) = lower.at(idx++).get<double>();
    const auto h = doc.at("h").get<std::vector<double>>();
    const auto delta = doc.contains("delta") ? doc.at("delta").get<std::vector<double>>() : std::vector<double>(n, 1.0);
    if (static_cast<Eigen::Index>(h.size()) != n || static_cast<Eigen::Index>(delta.size()) != n)
      throw error(errc::dimension_mismatch, "h and delta must have n entries");
    std::optional<std::uint64_t> seed;
    if (doc.contains("seed")) seed = doc.at("seed").get<std::uint64_t>();
    return IsingProblem(std::move(J), Eigen::Map<const Vector>(h.data(), n), Eigen::Map<const Vector>(delta.data(), n),
                        doc.value("offset", 0.0), parse_kind(doc.value("kind", std::string("custom"))), seed);
  } catch (const json::exception& e) {
    throw error(errc::io, std::string("malformed instance document: ") + e.what());
  }
}

namespace detail {

inline void dump_to(std::string& out, const json& j, int indent, int depth) {
  const auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(d * indent), ' ');
  };
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) { out += "{}"; break; }
      out += '{';
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += json(key).dump();
        out += indent < 0 ? ":" : ": ";
        dump_to(out, value, indent, depth + 1);
      }
      newline(depth);
      out += '}';
      break;
    }
    case json::value_t::array: {
      if (j.empty()) { out += "[]"; break; }
      out += '[';
      bool first = true;
      for (const auto& value : j) {
        if (!first) out += indent < 0 ? "," : ", ";
        first = false;
        dump_to(out, value, -1, depth + 1);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) { out += "null"; break; }
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += buf;
      break;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

/// Deterministic serialization with every float at 17 significant digits.
/// Objects are indented by `indent` (negative: single line); arrays stay on one line.
inline std::string dump(const json& j, int indent = -1) {
  std::string out;
  detail::dump_to(out, j, indent, 0);
  return out;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error(errc::io, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw error(errc::io, path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error(errc::io, "cannot write " + path);
  out << text;
  if (!out) throw error(errc::io, "write failed for " + path);
}

inline IsingProblem read_instance(const std::string& path) { return instance_from_json(read_json_file(path)); }

inline std::string bits_to_string(const Bitstring& b) {
  std::string s;
  for (int v : b.bits()) s += v > 0 ? '+' : '-';
  return s;
}

/// JSON-lines trajectory: header {n, p, tau, stride}, then one {k, t, spins} per slice.
inline std::string trajectory_to_jsonl(const Trajectory& traj) {
  std::string out = dump(json{{"n", traj.n}, {"p", traj.p}, {"tau", traj.tau}, {"stride", traj.stride}}) + "\n";
  for (const auto& slice : traj.slices) {
    json spins = json::array();
    for (Eigen::Index i = 0; i < slice.spins.rows(); ++i)
      spins.push_back(json::array({slice.spins(i, 0), slice.spins(i, 1), slice.spins(i, 2)}));
    out += dump(json{{"k", slice.k}, {"t", slice.t}, {"spins", std::move(spins)}}) + "\n";
  }
  return out;
}

inline Trajectory trajectory_from_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error(errc::io, "cannot open " + path);
  std::string line;
  Trajectory traj;
  try {
    if (!std::getline(in, line)) throw error(errc::io, "empty trajectory file");
    const json header = json::parse(line);
    traj.n = header.at("n").get<std::size_t>();
    traj.p = header.at("p").get<long long>();
    traj.tau = header.at("tau").get<double>();
    traj.stride = header.value("stride", 1LL);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json rec = json::parse(line);
      TrajectorySlice slice;
      slice.k = rec.at("k").get<long long>();
      slice.t = rec.at("t").get<double>();
      const auto& spins = rec.at("spins");
      if (spins.size() != traj.n) throw error(errc::dimension_mismatch, "slice has wrong spin count");
      slice.spins.resize(static_cast<Eigen::Index>(traj.n), 3);
      for (std::size_t i = 0; i < traj.n; ++i)
        for (int c = 0; c < 3; ++c) slice.spins(static_cast<Eigen::Index>(i), c) = spins.at(i).at(static_cast<std::size_t>(c)).get<double>();
      traj.slices.push_back(std::move(slice));
    }
  } catch (const json::exception& e) {
    throw error(errc::io, path + ": " + e.what());
  }
  return traj;
}

}  // namespace mfaoa
