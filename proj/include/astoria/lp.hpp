#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace astoria {

// Minimax relay-selection problem: candidate (entry, exit) pairs, the
// adversaries seen on them, and a 0/1 incidence row per adversary.
class SelectionProblem {
 public:
  // Throws std::invalid_argument when there are no pairs, a row has the
  // wrong width, or an adversary covers no pair.
  SelectionProblem(std::size_t pair_count, std::vector<std::string> adversaries,
                   std::vector<std::vector<std::uint8_t>> incidence);

  std::size_t pair_count() const noexcept { return pair_count_; }
  std::size_t adversary_count() const noexcept { return adversaries_.size(); }
  const std::string& adversary(std::size_t a) const { return adversaries_[a]; }
  std::size_t adversary_index(std::string_view label) const;  // throws std::out_of_range
  bool covers(std::size_t adversary, std::size_t pair) const {
    return incidence_[adversary][pair] != 0;
  }
  const std::vector<std::uint8_t>& row(std::size_t adversary) const {
    return incidence_[adversary];
  }

 private:
  std::size_t pair_count_;
  std::vector<std::string> adversaries_;
  std::vector<std::vector<std::uint8_t>> incidence_;
};

struct SelectionDistribution {
  std::vector<double> probs;  // one per pair, sums to 1
  double objective = 0.0;     // largest per-adversary exposure
  std::size_t pivots = 0;
};

inline constexpr double kLpTolerance = 1e-9;

// Minimizes the largest per-adversary exposure over distributions on the
// pairs, by a dense two-phase simplex. Ties among optima are broken by the
// deterministic pivot rule; callers get one optimal point. When `trace` is
// set, the initial and final tableaux are written to it.
SelectionDistribution solve_minimax(const SelectionProblem& problem,
                                    std::ostream* trace = nullptr);

double exposure(const SelectionDistribution& dist, const SelectionProblem& problem,
                std::size_t adversary);
double exposure(const SelectionDistribution& dist, const SelectionProblem& problem,
                std::string_view adversary);

// Plain-text listing of the LP: objective, one constraint per adversary and
// the simplex constraint.
void dump_problem(std::ostream& out, const SelectionProblem& problem);

// Reads an incidence matrix: one line per adversary, `label: b b b ...` with
// one 0/1 per pair. `#` comments allowed. Throws ParseError.
SelectionProblem parse_incidence(std::istream& in, std::string_view source = "<incidence>");

}  // namespace astoria
