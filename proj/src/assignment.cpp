#include "hoidet/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hoidet {

double pair_box_cost(const GtInstance& gt, const Prediction& pred) {
    return std::max(l1(gt.human_box, pred.human_box), l1(gt.object_box, pred.object_box));
}

double pair_giou_cost(const GtInstance& gt, const Prediction& pred) {
    return std::max(-giou(gt.human_box, pred.human_box), -giou(gt.object_box, pred.object_box));
}

double object_class_cost(const GtInstance& gt, const Prediction& pred) {
    return -pred.object_probs[static_cast<size_t>(gt.object_class)];
}

double action_class_cost(const GtInstance& gt, const Prediction& pred, double epsilon) {
    double pos_dot = 0.0, pos_count = 0.0;
    double neg_dot = 0.0, neg_count = 0.0;
    for (size_t j = 0; j < gt.actions.size(); ++j) {
        const double a = gt.actions[j];
        const double p = pred.action_probs[j];
        pos_dot += a * p;
        pos_count += a;
        neg_dot += (1.0 - a) * (1.0 - p);
        neg_count += 1.0 - a;
    }
    return -0.5 * (pos_dot / (pos_count + epsilon) + neg_dot / (neg_count + epsilon));
}

double combine_costs(double box, double giou_cost, double obj_class, double action,
                     const CostWeights& weights) {
    return weights.eta_b * box + weights.eta_u * giou_cost + weights.eta_c * obj_class +
           weights.eta_a * action;
}

std::vector<std::vector<double>> build_cost_matrix(const std::vector<GtInstance>& gts,
                                                   const std::vector<Prediction>& preds,
                                                   const CostWeights& weights) {
    const size_t n_q = preds.size();
    if (gts.size() > n_q) {
        throw std::invalid_argument("build_cost_matrix: more ground truths than queries");
    }
    std::vector<std::vector<double>> cost(n_q, std::vector<double>(n_q, 0.0));
    for (size_t i = 0; i < gts.size(); ++i) {
        for (size_t j = 0; j < n_q; ++j) {
            cost[i][j] = combine_costs(pair_box_cost(gts[i], preds[j]),
                                       pair_giou_cost(gts[i], preds[j]),
                                       object_class_cost(gts[i], preds[j]),
                                       action_class_cost(gts[i], preds[j], weights.epsilon),
                                       weights);
        }
    }
    return cost;
}

namespace {

// Shortest-augmenting-path assignment with dual potentials. Returns
// perm[row] = col; u, v are the optimal duals (1-based, index 0 unused).
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& a,
                                  std::vector<double>& u, std::vector<double>& v) {
    const int n = static_cast<int>(a.size());
    constexpr double kInf = std::numeric_limits<double>::infinity();
    u.assign(static_cast<size_t>(n) + 1, 0.0);
    v.assign(static_cast<size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(n) + 1, kInf);
        std::vector<char> used(static_cast<size_t>(n) + 1, 0);
        do {
            used[static_cast<size_t>(j0)] = 1;
            const int i0 = p[static_cast<size_t>(j0)];
            int j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double cur = a[static_cast<size_t>(i0 - 1)][static_cast<size_t>(j - 1)] -
                                   u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> perm(static_cast<size_t>(n), -1);
    for (int j = 1; j <= n; ++j) {
        if (p[static_cast<size_t>(j)] > 0) perm[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
    }
    return perm;
}

double row_order_total(const std::vector<std::vector<double>>& cost, const std::vector<int>& perm) {
    double total = 0.0;
    for (size_t i = 0; i < perm.size(); ++i) total += cost[i][static_cast<size_t>(perm[i])];
    return total;
}

// Kuhn augmenting path over the tight-edge graph, honoring forced rows.
bool try_augment(int row, const std::vector<std::vector<char>>& tight,
                 const std::vector<char>& col_forced, std::vector<int>& col_to_row,
                 std::vector<char>& visited) {
    const int n = static_cast<int>(tight.size());
    for (int j = 0; j < n; ++j) {
        if (!tight[static_cast<size_t>(row)][static_cast<size_t>(j)] ||
            col_forced[static_cast<size_t>(j)] || visited[static_cast<size_t>(j)]) {
            continue;
        }
        visited[static_cast<size_t>(j)] = 1;
        if (col_to_row[static_cast<size_t>(j)] < 0 ||
            try_augment(col_to_row[static_cast<size_t>(j)], tight, col_forced, col_to_row, visited)) {
            col_to_row[static_cast<size_t>(j)] = row;
            return true;
        }
    }
    return false;
}

// Among all minimum-cost assignments (perfect matchings of the tight-edge
// graph) pick the lexicographically smallest by row. Falls back to the
// solver's own assignment if floating-point slack classification was off.
std::vector<int> lexicographic_refine(const std::vector<std::vector<double>>& cost,
                                      const std::vector<int>& base_perm,
                                      const std::vector<double>& u, const std::vector<double>& v) {
    const int n = static_cast<int>(cost.size());
    double max_abs = 0.0;
    for (const auto& row : cost)
        for (double c : row) max_abs = std::max(max_abs, std::abs(c));
    const double tol = 1e-9 * (1.0 + max_abs);

    std::vector<std::vector<char>> tight(static_cast<size_t>(n),
                                         std::vector<char>(static_cast<size_t>(n), 0));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double slack = cost[static_cast<size_t>(i)][static_cast<size_t>(j)] -
                                 u[static_cast<size_t>(i + 1)] - v[static_cast<size_t>(j + 1)];
            tight[static_cast<size_t>(i)][static_cast<size_t>(j)] = std::abs(slack) <= tol;
        }
    }

    std::vector<int> row_to_col = base_perm;
    std::vector<int> col_to_row(static_cast<size_t>(n), -1);
    for (int i = 0; i < n; ++i) col_to_row[static_cast<size_t>(row_to_col[static_cast<size_t>(i)])] = i;
    std::vector<char> col_forced(static_cast<size_t>(n), 0);

    for (int i = 0; i < n; ++i) {
        const int cur = row_to_col[static_cast<size_t>(i)];
        for (int j = 0; j < cur; ++j) {
            if (!tight[static_cast<size_t>(i)][static_cast<size_t>(j)] ||
                col_forced[static_cast<size_t>(j)]) {
                continue;
            }
            // Tentatively move row i to column j; the displaced row (if any)
            // must find an alternative column for the move to stand.
            const int displaced = col_to_row[static_cast<size_t>(j)];
            col_to_row[static_cast<size_t>(j)] = i;
            col_to_row[static_cast<size_t>(cur)] = -1;
            bool ok = true;
            if (displaced >= 0 && displaced != i) {
                std::vector<char> visited(static_cast<size_t>(n), 0);
                visited[static_cast<size_t>(j)] = 1;
                ok = try_augment(displaced, tight, col_forced, col_to_row, visited);
            }
            if (ok) {
                for (int c = 0; c < n; ++c) {
                    if (col_to_row[static_cast<size_t>(c)] >= 0)
                        row_to_col[static_cast<size_t>(col_to_row[static_cast<size_t>(c)])] = c;
                }
                break;
            }
            col_to_row[static_cast<size_t>(j)] = displaced;
            col_to_row[static_cast<size_t>(cur)] = i;
        }
        col_forced[static_cast<size_t>(row_to_col[static_cast<size_t>(i)])] = 1;
    }

    if (std::abs(row_order_total(cost, row_to_col) - row_order_total(cost, base_perm)) >
        tol * static_cast<double>(n)) {
        return base_perm;
    }
    return row_to_col;
}

}  // namespace

std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
    const size_t n = cost.size();
    if (n == 0) return {};
    for (const auto& row : cost) {
        if (row.size() != n) throw std::invalid_argument("hungarian: matrix is not square");
        for (double c : row) {
            if (!std::isfinite(c)) throw std::invalid_argument("hungarian: non-finite cost entry");
        }
    }
    std::vector<double> u, v;
    const std::vector<int> base = solve_assignment(cost, u, v);
    return lexicographic_refine(cost, base, u, v);
}

Assignment match(const std::vector<GtInstance>& gts, const std::vector<Prediction>& preds,
                 const CostWeights& weights) {
    Assignment out;
    out.n_real = static_cast<int>(gts.size());
    out.gt_to_pred = hungarian(build_cost_matrix(gts, preds, weights));
    return out;
}

}  // namespace hoidet
