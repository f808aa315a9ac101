#include "fodewalk/report_io.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fodewalk {
namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void bad(const std::string& msg, int row = -1) {
  throw ValidationError(ValidationError::Kind::BadStructure, row, msg);
}

const ordered_json& field(const ordered_json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) bad(std::string("problem JSON: missing field '") + key + "'");
  return *it;
}

std::vector<double> real_array(const ordered_json& j, const char* key, int n) {
  const auto& a = field(j, key);
  if (!a.is_array() || static_cast<int>(a.size()) != n)
    bad(std::string("problem JSON: '") + key + "' must be an array of length " +
        std::to_string(n));
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    if (!a[i].is_number()) bad(std::string("problem JSON: '") + key + "' entry " +
                               std::to_string(i + 1) + " is not a number");
    out[i] = a[i].get<double>();
  }
  return out;
}

// Row-major (row, col, value) triplets with the diagonal in column position.
std::vector<std::array<double, 3>> canonical_triplets(const FodeProblem& p) {
  std::vector<std::array<double, 3>> t;
  for (int i = 0; i < p.n; ++i) {
    auto off = p.a[i].off;
    std::sort(off.begin(), off.end());
    bool diag_done = false;
    for (const auto& [col, val] : off) {
      if (!diag_done && col > i) {
        t.push_back({double(i + 1), double(i + 1), p.a[i].diag});
        diag_done = true;
      }
      t.push_back({double(i + 1), double(col + 1), val});
    }
    if (!diag_done) t.push_back({double(i + 1), double(i + 1), p.a[i].diag});
  }
  return t;
}

ordered_json problem_core_json(const FodeProblem& p) {
  ordered_json j;
  j["n"] = p.n;
  auto& trip = j["triplets"] = ordered_json::array();
  for (const auto& t : canonical_triplets(p))
    trip.push_back({int(t[0]), int(t[1]), t[2]});
  j["alpha"] = p.alpha;
  j["u0"] = p.u0;
  j["T"] = p.T;
  j["start_node"] = p.start_node + 1;
  return j;
}

const char* mode_name(Mode m) {
  return m == Mode::Simplified ? "simplified" : "general";
}

ordered_json estimate_json(const Estimate& e) {
  ordered_json j;
  j["mean"] = e.mean;
  j["var"] = e.variance;
  j["ci"] = {e.ci_lo, e.ci_hi};
  return j;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

FodeProblem parse_problem_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("problem JSON: parse failure: ") + e.what());
  }
  if (!j.is_object()) bad("problem JSON: top level must be an object");

  FodeProblem p;
  const auto& jn = field(j, "n");
  if (!jn.is_number_integer() || jn.get<int>() < 1)
    bad("problem JSON: 'n' must be a positive integer");
  p.n = jn.get<int>();
  p.a.resize(p.n);

  const auto& trips = field(j, "triplets");
  if (!trips.is_array()) bad("problem JSON: 'triplets' must be an array");
  std::vector<std::vector<bool>> seen(p.n, std::vector<bool>(p.n, false));
  int idx = 0;
  for (const auto& t : trips) {
    ++idx;
    const std::string at = "problem JSON: triplet " + std::to_string(idx);
    if (!t.is_array() || t.size() != 3 || !t[0].is_number_integer() ||
        !t[1].is_number_integer() || !t[2].is_number())
      bad(at + " must be [row, col, value]");
    const int r = t[0].get<int>(), c = t[1].get<int>();
    if (r < 1 || r > p.n) bad(at + ": row " + std::to_string(r) + " out of range", r - 1);
    if (c < 1 || c > p.n) bad(at + ": col " + std::to_string(c) + " out of range", r - 1);
    if (seen[r - 1][c - 1])
      bad(at + ": duplicate entry for row " + std::to_string(r) + ", col " +
          std::to_string(c), r - 1);
    seen[r - 1][c - 1] = true;
    const double v = t[2].get<double>();
    if (r == c)
      p.a[r - 1].diag = v;
    else if (v != 0.0)
      p.a[r - 1].off.push_back({c - 1, v});
  }
  for (auto& row : p.a) std::sort(row.off.begin(), row.off.end());

  p.alpha = real_array(j, "alpha", p.n);
  p.u0 = real_array(j, "u0", p.n);
  const auto& jt = field(j, "T");
  if (!jt.is_number()) bad("problem JSON: 'T' must be a number");
  p.T = jt.get<double>();
  const auto& js = field(j, "start_node");
  if (!js.is_number_integer() || js.get<int>() < 1 || js.get<int>() > p.n)
    bad("problem JSON: 'start_node' must be in [1, n]");
  p.start_node = js.get<int>() - 1;

  if (auto it = j.find("mode"); it != j.end()) {
    const std::string m = it->get<std::string>();
    if (m == "simplified")
      p.mode = Mode::Simplified;
    else if (m == "general")
      p.mode = Mode::General;
    else
      bad("problem JSON: 'mode' must be \"simplified\" or \"general\"");
  }
  if (auto it = j.find("seed"); it != j.end()) {
    if (!it->is_number_integer()) bad("problem JSON: 'seed' must be an integer");
    p.seed = it->get<std::uint64_t>();
  }
  p.num_walks = 100000;
  if (auto it = j.find("num_walks"); it != j.end()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0)
      bad("problem JSON: 'num_walks' must be a non-negative integer");
    p.num_walks = it->get<std::uint64_t>();
  }
  return p;
}

FodeProblem load_problem_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad("cannot open problem file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_problem_json(ss.str());
}

std::string serialize_problem_json(const FodeProblem& p) {
  ordered_json j = problem_core_json(p);
  j["mode"] = mode_name(p.mode);
  j["seed"] = p.seed;
  j["num_walks"] = p.num_walks;
  return j.dump(2) + "\n";
}

std::string problem_hash(const FodeProblem& p) {
  const std::string core = problem_core_json(p).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : core) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string serialize_report_json(const EstimateReport& rep,
                                  const std::string& hash,
                                  const ReportOptions& opts) {
  ordered_json j;
  j["schema"] = 1;
  j["problem_hash"] = hash;
  j["mode"] = mode_name(rep.mode);
  j["n_walks"] = rep.n_s;
  j["seed"] = rep.master_seed;
  j["level"] = rep.level;
  if (opts.with_timestamp) {
    char stamp[32];
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    j["timestamp"] = stamp;
  }
  j["solution"] = estimate_json(rep.value);
  if (rep.has_sensitivities) {
    auto& gu = j["grad_u0"] = ordered_json::array();
    for (const auto& e : rep.grad_u0) gu.push_back(estimate_json(e));
    auto& ga = j["grad_A"] = ordered_json::array();
    for (const auto& [rc, e] : rep.grad_a) {
      ordered_json o;
      o["row"] = rc.first + 1;
      o["col"] = rc.second + 1;
      o["mean"] = e.mean;
      o["var"] = e.variance;
      o["ci"] = {e.ci_lo, e.ci_hi};
      ga.push_back(std::move(o));
    }
    auto& gl = j["grad_alpha"] = ordered_json::array();
    for (const auto& e : rep.grad_alpha) gl.push_back(estimate_json(e));
    j["grad_T"] = estimate_json(rep.grad_t);
  } else {
    j["sensitivities"] = rep.mode == Mode::General
                             ? "not available in general mode"
                             : "disabled";
  }
  j["jumps"]["mean"] = rep.jumps_mean;
  j["jumps"]["max"] = rep.jumps_max;
  return j.dump(2) + "\n";
}

std::string serialize_report_csv(const EstimateReport& rep,
                                 const std::string& hash) {
  std::ostringstream out;
  out << "# schema 1, problem_hash " << hash << ", mode " << mode_name(rep.mode)
      << ", n_walks " << rep.n_s << ", seed " << rep.master_seed << "\n";
  out << "quantity,row,col,mean,var,ci_lo,ci_hi\n";
  auto line = [&](const char* q, int row, int col, const Estimate& e) {
    out << q << ',';
    if (row > 0) out << row;
    out << ',';
    if (col > 0) out << col;
    out << ',' << num(e.mean) << ',' << num(e.variance) << ',' << num(e.ci_lo)
        << ',' << num(e.ci_hi) << "\n";
  };
  line("solution", 0, 0, rep.value);
  if (rep.has_sensitivities) {
    for (int i = 0; i < rep.n; ++i) line("grad_u0", i + 1, 0, rep.grad_u0[i]);
    for (const auto& [rc, e] : rep.grad_a)
      line("grad_A", rc.first + 1, rc.second + 1, e);
    for (int i = 0; i < rep.n; ++i) line("grad_alpha", i + 1, 0, rep.grad_alpha[i]);
    line("grad_T", 0, 0, rep.grad_t);
  }
  out << "jumps_mean,,," << num(rep.jumps_mean) << ",,,\n";
  out << "jumps_max,,," << rep.jumps_max << ",,,\n";
  return out.str();
}

}  // namespace fodewalk
