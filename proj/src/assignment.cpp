#include "formflight/assignment.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace formflight {

namespace {

void validate(const AssignmentProblem& problem, double epsilon) {
  const auto& c = problem.costs;
  if (c.rows() < 1 || c.rows() != c.cols())
    throw std::invalid_argument("auction: cost matrix must be square and non-empty");
  if (!c.allFinite()) throw std::invalid_argument("auction: costs must be finite");
  if ((c.array() < 0.0).any()) throw std::invalid_argument("auction: costs must be >= 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("auction: epsilon must be positive");
}

}  // namespace

Assignment auction_assign(const AssignmentProblem& problem, double epsilon, AuctionStats* stats) {
  validate(problem, epsilon);
  const int n = static_cast<int>(problem.costs.rows());
  // Maximization form: value(i, j) = -cost(i, j).
  std::vector<double> price(n, 0.0);
  std::vector<int> owner(n, -1);
  std::vector<int> assigned(n, -1);

  AuctionStats local;
  AuctionStats& st = stats ? *stats : local;
  st.rounds = 0;
  st.prices_monotone = true;

  // Bids raise prices by at least epsilon, so rounds are bounded by
  // n * (cost range / epsilon); the cap only trips on degenerate inputs.
  const double cost_range = problem.costs.maxCoeff() - problem.costs.minCoeff();
  const long max_rounds = 64 + 4L * n * static_cast<long>(std::ceil(cost_range / epsilon + 1.0));

  int unassigned = n;
  while (unassigned > 0) {
    if (++st.rounds > max_rounds) throw std::runtime_error("auction: round cap exceeded");
    int i = 0;
    while (assigned[i] >= 0) ++i;  // lowest-index unassigned bidder

    int best_j = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    double second_v = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      const double v = -problem.costs(i, j) - price[j];
      if (v > best_v) {
        second_v = best_v;
        best_v = v;
        best_j = j;  // strict improvement only: ties keep the lowest index
      } else if (v > second_v) {
        second_v = v;
      }
    }
    const double bid = (n == 1) ? epsilon : (best_v - second_v + epsilon);
    const double old_price = price[best_j];
    price[best_j] += bid;
    if (price[best_j] < old_price) st.prices_monotone = false;

    if (owner[best_j] >= 0) {
      assigned[owner[best_j]] = -1;
      ++unassigned;
    }
    owner[best_j] = i;
    assigned[i] = best_j;
    --unassigned;
  }

  Assignment result;
  result.target_of.assign(assigned.begin(), assigned.end());
  result.total_cost = 0.0;
  for (int i = 0; i < n; ++i) result.total_cost += problem.costs(i, result.target_of[i]);
  return result;
}

bool swap_improvement_check(const AssignmentProblem& problem, const Assignment& assignment,
                            double epsilon) {
  const int n = static_cast<int>(problem.costs.rows());
  if (static_cast<int>(assignment.target_of.size()) != n)
    throw std::invalid_argument("swap_improvement_check: size mismatch");
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const int ti = assignment.target_of[i];
      const int tj = assignment.target_of[j];
      const double now = problem.costs(i, ti) + problem.costs(j, tj);
      const double swapped = problem.costs(i, tj) + problem.costs(j, ti);
      if (swapped < now - 2.0 * epsilon) return false;
    }
  }
  return true;
}

}  // namespace formflight
