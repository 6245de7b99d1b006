#pragma once

// JSON problem and solution files ("dba/1"), run summaries and comparison
// tables.

#include <iosfwd>
#include <string>

#include "dba/builders.hpp"
#include "dba/solvers.hpp"

namespace dba {

inline constexpr const char* kProblemFormat = "dba/1";
inline constexpr const char* kSolutionFormat = "dba-solution/1";
inline constexpr const char* kSvecConvention = "svec-upper-sqrt2";

/// Pretty-printed, deterministic JSON; numbers round-trip exactly.
std::string write_problem(const DBAProblem& problem);
/// Throws ParseError naming the line (syntax errors) or the field path.
/// The parsed problem is validated; dimension errors become ParseError.
DBAProblem parse_problem(const std::string& text);

DBAProblem read_problem_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

struct Solution {
  std::string status;
  PrimalPoint primal;
  DualPoint dual;
};

std::string write_solution(const Solution& s);
Solution parse_solution(const std::string& text);

/// Objectives, every η component, η_gap, status and run facts.
std::string write_summary(const SolveReport& report, const std::string& solver);

/// {p, q, c, P, Q} with P and Q as arrays of p rows.
UflInstance parse_ufl(const std::string& text);
std::string write_ufl(const UflInstance& inst);

}  // namespace dba
