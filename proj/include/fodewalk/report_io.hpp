#pragma once
// Problem/report interchange: problem JSON with 1-based triplets, canonical
// echo, FNV-1a hashing, and report emission as JSON or CSV.

#include <string>

#include "fodewalk/estimator.hpp"
#include "fodewalk/problem.hpp"

namespace fodewalk {

// Problem JSON fields:
//   n          node count
//   triplets   array of [row, col, value], 1-based, diagonal included
//   alpha      n reals
//   u0         n reals
//   T          final time
//   start_node observed node, 1-based
//   mode       "simplified" | "general"    (optional, default simplified)
//   seed       master seed                 (optional, default 0)
//   num_walks  default N_s for solve       (optional, default 100000)
// Structural problems throw ValidationError naming the offending row or
// triplet; value-range checks are left to validate_problem.
FodeProblem parse_problem_json(const std::string& text);
FodeProblem load_problem_json(const std::string& path);

// Canonical echo: fixed key order, triplets sorted row-major, shortest
// round-trip number formatting.  parse(serialize(p)) is a fixed point.
std::string serialize_problem_json(const FodeProblem& p);

// 64-bit FNV-1a over the canonical serialization of the mathematical
// problem only (n, triplets, alpha, u0, T, start_node), as 16 hex digits.
// Run parameters (mode, seed, num_walks) are reported separately and do
// not change the hash.
std::string problem_hash(const FodeProblem& p);

struct ReportOptions {
  bool with_timestamp = true;  // UTC stamp; the only non-deterministic field
};

// Report JSON, schema 1: solution and each sensitivity family as
// {mean, var, ci:[lo,hi]}; grad_A sparse with 1-based row/col, sorted
// row-major; grad_u0/grad_alpha dense in node order.  When the report
// carries no sensitivities (general mode) the gradient fields are replaced
// by a "not available in general mode" marker.
std::string serialize_report_json(const EstimateReport& rep,
                                  const std::string& hash,
                                  const ReportOptions& opts = {});

// CSV with header quantity,row,col,mean,var,ci_lo,ci_hi; one line per
// estimate (same 1-based indexing), then jumps_mean / jumps_max lines.
std::string serialize_report_csv(const EstimateReport& rep,
                                 const std::string& hash);

}  // namespace fodewalk
