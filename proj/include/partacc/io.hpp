#pragma once

// CSV and JSON serialization for records, outcomes, fit reports and run
// manifests. Floating-point fields use the shortest decimal form that reads
// back to the same double, so parse(emit(x)) reproduces x exactly.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "partacc/error.hpp"
#include "partacc/fitting.hpp"
#include "partacc/monte_carlo.hpp"
#include "partacc/trainer.hpp"

namespace partacc::io {

using json = nlohmann::ordered_json;

namespace detail {

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <class T>
T parse_number(std::string_view s, int line_no, std::string_view what) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || s.empty()) {
    fail(errc::parse_error, fmt::format("line {}: bad {} '{}'", line_no, what, s));
  }
  return v;
}

// Reads non-empty lines, checking the header. Returns the data lines with
// their 1-based line numbers.
inline std::vector<std::pair<int, std::string>> read_table(std::istream& in, std::string_view header) {
  std::vector<std::pair<int, std::string>> rows;
  std::string line;
  int line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!seen_header) {
      if (line != header) fail(errc::parse_error, fmt::format("expected header '{}', got '{}'", header, line));
      seen_header = true;
      continue;
    }
    rows.emplace_back(line_no, line);
  }
  if (!seen_header) fail(errc::parse_error, fmt::format("empty input; expected header '{}'", header));
  return rows;
}

}  // namespace detail

inline std::string format_seed(RngSeed s) { return fmt::format("{}:{}", s.seed, s.stream); }

inline RngSeed parse_seed(std::string_view text, int line_no = 0) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    return {detail::parse_number<std::uint64_t>(text, line_no, "seed"), 0};
  }
  return {detail::parse_number<std::uint64_t>(text.substr(0, colon), line_no, "seed"),
          detail::parse_number<std::uint64_t>(text.substr(colon + 1), line_no, "seed stream")};
}

// ---- training records ----------------------------------------------------

inline constexpr std::string_view training_header = "d,N,L,repeat,seed,epochs,final_loss,accuracy";

/// One line of the training CSV: a single repeat of one record.
struct TrainingRow {
  ProblemSpec spec;
  int repeat = 0;
  RngSeed seed;
  std::int64_t epochs = 0;
  double final_loss = 0.0;
  double accuracy = 0.0;

  friend bool operator==(const TrainingRow&, const TrainingRow&) = default;
};

inline std::vector<TrainingRow> to_rows(const TrainingRecord& record) {
  std::vector<TrainingRow> rows;
  for (const auto& r : record.repeats) {
    rows.push_back({record.spec, r.repeat, record.seed, r.epochs, r.final_loss, r.accuracy});
  }
  return rows;
}

inline void write_training_csv(std::ostream& out, const std::vector<TrainingRow>& rows) {
  out << training_header << '\n';
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{}\n", r.spec.d, r.spec.N, r.spec.L, r.repeat,
                       format_seed(r.seed), r.epochs, r.final_loss, r.accuracy);
  }
}

inline std::vector<TrainingRow> read_training_csv(std::istream& in) {
  std::vector<TrainingRow> rows;
  for (const auto& [line_no, line] : detail::read_table(in, training_header)) {
    const auto f = detail::split_csv(line);
    if (f.size() != 8) fail(errc::parse_error, fmt::format("line {}: expected 8 fields, got {}", line_no, f.size()));
    TrainingRow r;
    r.spec.d = detail::parse_number<int>(f[0], line_no, "d");
    r.spec.N = detail::parse_number<std::int64_t>(f[1], line_no, "N");
    r.spec.L = detail::parse_number<std::int64_t>(f[2], line_no, "L");
    r.repeat = detail::parse_number<int>(f[3], line_no, "repeat");
    r.seed = parse_seed(f[4], line_no);
    r.epochs = detail::parse_number<std::int64_t>(f[5], line_no, "epochs");
    r.final_loss = detail::parse_number<double>(f[6], line_no, "final_loss");
    r.accuracy = detail::parse_number<double>(f[7], line_no, "accuracy");
    rows.push_back(r);
  }
  return rows;
}

/// Groups rows into records keyed by (spec, seed), in order of first
/// appearance. Only the CSV columns are restored.
inline std::vector<TrainingRecord> records_from_rows(const std::vector<TrainingRow>& rows) {
  std::vector<TrainingRecord> records;
  for (const auto& row : rows) {
    auto it = std::find_if(records.begin(), records.end(),
                           [&](const TrainingRecord& r) { return r.spec == row.spec && r.seed == row.seed; });
    if (it == records.end()) {
      records.push_back({row.spec, row.seed, {}});
      it = records.end() - 1;
    }
    RepeatResult rep;
    rep.repeat = row.repeat;
    rep.epochs = row.epochs;
    rep.final_loss = row.final_loss;
    rep.accuracy = row.accuracy;
    it->repeats.push_back(rep);
  }
  return records;
}

// ---- Monte Carlo outcomes -------------------------------------------------

inline constexpr std::string_view outcome_header = "trial,gamma,distinct_cells,complete";

inline void write_outcome_csv(std::ostream& out, const SeparationOutcome& outcome) {
  out << outcome_header << '\n';
  std::size_t i = 0;
  for (const auto& t : outcome.per_trial()) {
    out << fmt::format("{},{},{},{}\n", i++, t.gamma, t.distinct_cells, t.complete ? 1 : 0);
  }
}

inline SeparationOutcome read_outcome_csv(std::istream& in) {
  std::vector<TrialOutcome> trials;
  for (const auto& [line_no, line] : detail::read_table(in, outcome_header)) {
    const auto f = detail::split_csv(line);
    if (f.size() != 4) fail(errc::parse_error, fmt::format("line {}: expected 4 fields, got {}", line_no, f.size()));
    const auto idx = detail::parse_number<std::size_t>(f[0], line_no, "trial");
    if (idx != trials.size()) fail(errc::parse_error, fmt::format("line {}: trials out of order", line_no));
    TrialOutcome t;
    t.gamma = detail::parse_number<double>(f[1], line_no, "gamma");
    t.distinct_cells = detail::parse_number<std::uint64_t>(f[2], line_no, "distinct_cells");
    const auto complete = detail::parse_number<int>(f[3], line_no, "complete");
    if (complete != 0 && complete != 1) fail(errc::parse_error, fmt::format("line {}: complete must be 0 or 1", line_no));
    t.complete = complete == 1;
    trials.push_back(t);
  }
  return SeparationOutcome(std::move(trials));
}

inline json outcome_summary(const SeparationOutcome& outcome) {
  return json{{"trials", outcome.trials()},
              {"complete_fraction", outcome.complete_fraction()},
              {"se", outcome.standard_error()},
              {"mean_gamma", outcome.mean_gamma()}};
}

inline void write_histogram_csv(std::ostream& out, const GammaHistogram& h) {
  out << "bin_center,mass,density\n";
  for (std::size_t i = 0; i < h.bins(); ++i) {
    out << fmt::format("{},{},{}\n", h.bin_center(i), h.mass(i), h.density(i));
  }
  out << fmt::format("1,{},\n", h.point_mass());
}

// ---- fitting --------------------------------------------------------------

inline json to_json(const FitReport& report) {
  json excluded = json::array();
  for (const auto& e : report.excluded) {
    excluded.push_back({{"index", e.index},
                        {"d", e.spec.d},
                        {"N", e.spec.N},
                        {"L", e.spec.L},
                        {"accuracy", e.measured_accuracy},
                        {"reason", e.reason}});
  }
  return json{{"d", report.coefficients.d},
              {"x", report.coefficients.x},
              {"y", report.coefficients.y},
              {"c", report.coefficients.c},
              {"r2_linear_scale", report.r_squared},
              {"r2_log_scale", report.r_squared_log},
              {"samples_used", report.residuals.size()},
              {"excluded", excluded}};
}

// ---- manifests ------------------------------------------------------------

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_hex(std::string_view bytes) { return fmt::format("{:016x}", fnv1a(bytes)); }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::parse_error, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;  // canonical argument list, replayable
  std::uint64_t seed = 0;
  std::string artifact_version;
  std::string model_version;
  std::string timestamp;
  std::string stdout_hash;
  std::map<std::string, std::string> output_hashes;  // file name -> hash

  /// Hash over everything that must reproduce; the timestamp is left out.
  std::string reproducibility_hash() const {
    json j = to_json();
    j.erase("timestamp");
    return hash_hex(j.dump());
  }

  json to_json() const {
    json outputs = json::object();
    for (const auto& [name, h] : output_hashes) outputs[name] = h;
    return json{{"command", command},
                {"arguments", arguments},
                {"seed", seed},
                {"artifact_version", artifact_version},
                {"model_version", model_version},
                {"timestamp", timestamp},
                {"stdout_hash", stdout_hash},
                {"outputs", outputs}};
  }

  static RunManifest from_json(const json& j) {
    try {
      RunManifest m;
      m.command = j.at("command").get<std::string>();
      m.arguments = j.at("arguments").get<std::vector<std::string>>();
      m.seed = j.at("seed").get<std::uint64_t>();
      m.artifact_version = j.at("artifact_version").get<std::string>();
      m.model_version = j.at("model_version").get<std::string>();
      m.timestamp = j.value("timestamp", "");
      m.stdout_hash = j.at("stdout_hash").get<std::string>();
      for (const auto& [name, h] : j.at("outputs").items()) m.output_hashes[name] = h.get<std::string>();
      return m;
    } catch (const json::exception& e) {
      fail(errc::parse_error, std::string("malformed manifest: ") + e.what());
    }
  }
};

}  // namespace partacc::io
