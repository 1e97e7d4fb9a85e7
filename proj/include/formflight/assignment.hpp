#pragma once

#include <Eigen/Dense>
#include <vector>

namespace formflight {

// Square cost matrix, costs(i, j) = cost of giving target j to UAV i.
// Entries must be finite and non-negative.
struct AssignmentProblem {
  Eigen::MatrixXd costs;
};

struct Assignment {
  std::vector<int> target_of;  // permutation, UAV i -> target target_of[i]
  double total_cost = 0.0;
};

struct AuctionStats {
  long rounds = 0;
  bool prices_monotone = true;
};

// Forward auction over negated costs with a fixed epsilon. Terminates with
// total cost within n * epsilon of optimal; exact whenever cost gaps exceed
// that. Equal bids resolve to the lowest target index, so results are
// deterministic.
Assignment auction_assign(const AssignmentProblem& problem, double epsilon = 1e-6,
                          AuctionStats* stats = nullptr);

// True when no pairwise swap lowers the total cost by more than 2 * epsilon.
bool swap_improvement_check(const AssignmentProblem& problem, const Assignment& assignment,
                            double epsilon = 1e-6);

}  // namespace formflight
