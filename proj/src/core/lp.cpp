#include "astoria/lp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <stdexcept>

#include "astoria/error.hpp"
#include "astoria/text.hpp"

namespace astoria {

SelectionProblem::SelectionProblem(std::size_t pair_count, std::vector<std::string> adversaries,
                                   std::vector<std::vector<std::uint8_t>> incidence)
    : pair_count_(pair_count),
      adversaries_(std::move(adversaries)),
      incidence_(std::move(incidence)) {
  if (pair_count_ == 0) throw std::invalid_argument("selection problem has no pairs");
  if (adversaries_.size() != incidence_.size())
    throw std::invalid_argument("one incidence row per adversary required");
  for (std::size_t a = 0; a < incidence_.size(); ++a) {
    const auto& row = incidence_[a];
    if (row.size() != pair_count_)
      throw std::invalid_argument("incidence row for '" + adversaries_[a] +
                                  "' has the wrong width");
    if (std::none_of(row.begin(), row.end(), [](auto v) { return v != 0; }))
      throw std::invalid_argument("adversary '" + adversaries_[a] + "' covers no pair");
  }
}

std::size_t SelectionProblem::adversary_index(std::string_view label) const {
  for (std::size_t a = 0; a < adversaries_.size(); ++a)
    if (adversaries_[a] == label) return a;
  throw std::out_of_range("unknown adversary '" + std::string(label) + "'");
}

namespace {

// Dense simplex tableau for: minimize c.x subject to rows (A x = b, b >= 0),
// x >= 0, starting from a given feasible basis.
class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * (cols + 1), 0.0), basis_(rows, 0),
        cost_(cols + 1, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data_[r * (cols_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * (cols_ + 1) + c]; }
  double& rhs(std::size_t r) { return at(r, cols_); }
  double rhs(std::size_t r) const { return at(r, cols_); }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::vector<std::size_t>& basis() { return basis_; }
  const std::vector<std::size_t>& basis() const { return basis_; }

  // Installs an objective and prices it out against the current basis.
  void set_objective(const std::vector<double>& c) {
    std::fill(cost_.begin(), cost_.end(), 0.0);
    for (std::size_t j = 0; j < cols_; ++j) cost_[j] = c[j];
    for (std::size_t r = 0; r < rows_; ++r) {
      const double cb = c[basis_[r]];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j <= cols_; ++j) cost_[j] -= cb * at(r, j);
    }
  }

  double objective_value() const { return -cost_[cols_]; }
  double reduced_cost(std::size_t j) const { return cost_[j]; }

  void pivot(std::size_t pr, std::size_t pc) {
    const double p = at(pr, pc);
    for (std::size_t j = 0; j <= cols_; ++j) at(pr, j) /= p;
    at(pr, pc) = 1.0;
    for (std::size_t r = 0; r < rows_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= cols_; ++j) at(r, j) -= f * at(pr, j);
      at(r, pc) = 0.0;
    }
    const double f = cost_[pc];
    if (f != 0.0) {
      for (std::size_t j = 0; j <= cols_; ++j) cost_[j] -= f * at(pr, j);
      cost_[pc] = 0.0;
    }
    basis_[pr] = pc;
  }

  // Runs primal simplex on the installed objective. Columns with
  // `allowed[j] == false` never enter. Dantzig pricing, falling back to
  // Bland's rule after a run of degenerate pivots so the method terminates.
  std::size_t optimize(const std::vector<bool>& allowed) {
    constexpr std::size_t kDegenerateLimit = 50;
    const std::size_t max_pivots = 100 * (rows_ + cols_) + 1000;
    std::size_t pivots = 0;
    std::size_t degenerate_run = 0;
    while (true) {
      const bool bland = degenerate_run >= kDegenerateLimit;
      std::size_t enter = cols_;
      double best = -kLpTolerance;
      for (std::size_t j = 0; j < cols_; ++j) {
        if (!allowed[j] || cost_[j] >= -kLpTolerance) continue;
        if (bland) {
          enter = j;
          break;
        }
        if (cost_[j] < best) {
          best = cost_[j];
          enter = j;
        }
      }
      if (enter == cols_) return pivots;

      std::size_t leave = rows_;
      double ratio = 0.0;
      for (std::size_t r = 0; r < rows_; ++r) {
        const double a = at(r, enter);
        if (a <= kLpTolerance) continue;
        const double q = std::max(rhs(r), 0.0) / a;
        if (leave == rows_ || q < ratio - 1e-12 ||
            (q <= ratio + 1e-12 && basis_[r] < basis_[leave])) {
          leave = r;
          ratio = q;
        }
      }
      if (leave == rows_) throw SolverError("minimax LP reported unbounded");
      degenerate_run = ratio <= 1e-12 ? degenerate_run + 1 : 0;
      pivot(leave, enter);
      if (++pivots > max_pivots) throw SolverError("simplex pivot limit exceeded");
    }
  }

  void print(std::ostream& out, const std::vector<std::string>& names) const {
    const auto flags = out.flags();
    const auto precision = out.precision();
    out << std::setw(8) << "basis";
    for (std::size_t j = 0; j < cols_; ++j) out << std::setw(10) << names[j];
    out << std::setw(10) << "rhs" << '\n';
    out << std::fixed << std::setprecision(4);
    for (std::size_t r = 0; r < rows_; ++r) {
      out << std::setw(8) << names[basis_[r]];
      for (std::size_t j = 0; j <= cols_; ++j) out << std::setw(10) << at(r, j);
      out << '\n';
    }
    out << std::setw(8) << "cost";
    for (std::size_t j = 0; j <= cols_; ++j) out << std::setw(10) << cost_[j];
    out << '\n';
    out.flags(flags);
    out.precision(precision);
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
  std::vector<std::size_t> basis_;
  std::vector<double> cost_;
};

}  // namespace

SelectionDistribution solve_minimax(const SelectionProblem& problem, std::ostream* trace) {
  const std::size_t n = problem.pair_count();
  SelectionDistribution out;
  if (problem.adversary_count() == 0) {
    out.probs.assign(n, 1.0 / static_cast<double>(n));
    return out;
  }

  // Duplicate adversary rows give identical constraints.
  std::vector<std::size_t> rows;
  {
    std::map<std::vector<std::uint8_t>, std::size_t> seen;
    for (std::size_t a = 0; a < problem.adversary_count(); ++a)
      if (seen.emplace(problem.row(a), a).second) rows.push_back(a);
  }
  const std::size_t m = rows.size();

  // Columns: P_0..P_{n-1}, z, slack_0..slack_{m-1}, artificial.
  const std::size_t z_col = n;
  const std::size_t slack0 = n + 1;
  const std::size_t art = n + 1 + m;
  const std::size_t cols = art + 1;
  Tableau t(m + 1, cols);
  for (std::size_t r = 0; r < m; ++r) {
    const auto& row = problem.row(rows[r]);
    for (std::size_t j = 0; j < n; ++j) t.at(r, j) = row[j] ? 1.0 : 0.0;
    t.at(r, z_col) = -1.0;
    t.at(r, slack0 + r) = 1.0;
    t.rhs(r) = 0.0;
    t.basis()[r] = slack0 + r;
  }
  for (std::size_t j = 0; j < n; ++j) t.at(m, j) = 1.0;
  t.at(m, art) = 1.0;
  t.rhs(m) = 1.0;
  t.basis()[m] = art;

  std::vector<std::string> names;
  if (trace) {
    for (std::size_t j = 0; j < n; ++j) names.push_back("P" + std::to_string(j));
    names.push_back("z");
    for (std::size_t r = 0; r < m; ++r) names.push_back("s" + std::to_string(r));
    names.push_back("a");
  }

  // Phase 1: drive the artificial variable out.
  std::vector<double> cost(cols, 0.0);
  cost[art] = 1.0;
  t.set_objective(cost);
  if (trace) {
    *trace << "# initial tableau (phase 1)\n";
    t.print(*trace, names);
  }
  std::vector<bool> allowed(cols, true);
  out.pivots += t.optimize(allowed);
  if (t.objective_value() > kLpTolerance)
    throw SolverError("minimax LP infeasible after phase 1");
  for (std::size_t r = 0; r <= m; ++r) {
    if (t.basis()[r] != art) continue;
    for (std::size_t j = 0; j < art; ++j) {
      if (std::abs(t.at(r, j)) > kLpTolerance) {
        t.pivot(r, j);
        ++out.pivots;
        break;
      }
    }
  }

  // Phase 2: minimize z.
  allowed[art] = false;
  std::fill(cost.begin(), cost.end(), 0.0);
  cost[z_col] = 1.0;
  t.set_objective(cost);
  out.pivots += t.optimize(allowed);
  if (trace) {
    *trace << "# final tableau (phase 2)\n";
    t.print(*trace, names);
  }

  out.probs.assign(n, 0.0);
  for (std::size_t r = 0; r <= m; ++r)
    if (t.basis()[r] < n) out.probs[t.basis()[r]] = std::max(t.rhs(r), 0.0);
  double sum = 0.0;
  for (double p : out.probs) sum += p;
  if (sum <= 0.5) throw SolverError("minimax LP produced a degenerate distribution");
  for (double& p : out.probs) p /= sum;

  for (std::size_t a = 0; a < problem.adversary_count(); ++a)
    out.objective = std::max(out.objective, exposure(out, problem, a));
  if (out.objective > t.objective_value() + 1e-7)
    throw SolverError("minimax LP solution violates its own bound");
  return out;
}

double exposure(const SelectionDistribution& dist, const SelectionProblem& problem,
                std::size_t adversary) {
  if (adversary >= problem.adversary_count())
    throw std::out_of_range("unknown adversary index " + std::to_string(adversary));
  double total = 0.0;
  for (std::size_t j = 0; j < problem.pair_count(); ++j)
    if (problem.covers(adversary, j)) total += dist.probs[j];
  return total;
}

double exposure(const SelectionDistribution& dist, const SelectionProblem& problem,
                std::string_view adversary) {
  return exposure(dist, problem, problem.adversary_index(adversary));
}

void dump_problem(std::ostream& out, const SelectionProblem& problem) {
  out << "# minimax relay-selection LP\n";
  out << "pairs " << problem.pair_count() << '\n';
  out << "adversaries " << problem.adversary_count() << '\n';
  out << "minimize z\n";
  out << "subject to\n";
  for (std::size_t a = 0; a < problem.adversary_count(); ++a) {
    out << "  [" << problem.adversary(a) << "] ";
    bool first = true;
    for (std::size_t j = 0; j < problem.pair_count(); ++j) {
      if (!problem.covers(a, j)) continue;
      out << (first ? "" : " + ") << 'P' << j;
      first = false;
    }
    out << " - z <= 0\n";
  }
  out << "  ";
  for (std::size_t j = 0; j < problem.pair_count(); ++j) out << (j ? " + " : "") << 'P' << j;
  out << " = 1\n";
  out << "  P >= 0, z >= 0\n";
}

SelectionProblem parse_incidence(std::istream& in, std::string_view source) {
  const std::string src(source);
  std::vector<std::string> labels;
  std::vector<std::vector<std::uint8_t>> rows;
  std::size_t width = 0;
  text::for_each_record(in, [&](std::size_t line, std::string_view record) {
    const auto colon = record.find(':');
    if (colon == std::string_view::npos)
      throw ParseError(src, line, "expected '<label>: <0|1> ...'");
    const auto label = text::trim(record.substr(0, colon));
    if (label.empty()) throw ParseError(src, line, "empty adversary label");
    std::vector<std::uint8_t> row;
    for (auto tok : text::split(text::trim(record.substr(colon + 1)), ' ')) {
      tok = text::trim(tok);
      if (tok.empty()) continue;
      if (tok != "0" && tok != "1") throw ParseError(src, line, "incidence entries must be 0 or 1");
      row.push_back(tok == "1" ? 1 : 0);
    }
    if (rows.empty()) width = row.size();
    if (row.size() != width || width == 0)
      throw ParseError(src, line, "incidence row width differs from the first row");
    labels.emplace_back(label);
    rows.push_back(std::move(row));
  });
  if (rows.empty()) throw ParseError(src, 0, "no incidence rows");
  try {
    return SelectionProblem(width, std::move(labels), std::move(rows));
  } catch (const std::invalid_argument& e) {
    throw ParseError(src, 0, e.what());
  }
}

}  // namespace astoria
