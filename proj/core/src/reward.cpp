#include "dig/reward.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <cstdlib>
#include <limits>
#include <string>

namespace dig {

double MatchResult::total_iou() const {
    double sum = 0.0;
    for (const auto& p : pairs) sum += p.iou;
    return sum;
}

namespace {

struct Cursor {
    std::string_view text;
    std::size_t pos = 0;

    bool eof() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }
    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\n' ||
                          peek() == '\r'))
            ++pos;
    }
    bool accept(char c) {
        skip_ws();
        if (eof() || peek() != c) return false;
        ++pos;
        return true;
    }
};

bool parse_number(Cursor& cur, double& out) {
    cur.skip_ws();
    if (cur.eof()) return false;
    // Copy into a bounded buffer; the view need not be null-terminated.
    char buf[48];
    const std::size_t len = std::min(cur.text.size() - cur.pos, sizeof(buf) - 1);
    std::memcpy(buf, cur.text.data() + cur.pos, len);
    buf[len] = '\0';
    char* end = nullptr;
    const double v = std::strtod(buf, &end);
    if (end == buf || !std::isfinite(v)) return false;
    cur.pos += static_cast<std::size_t>(end - buf);
    out = v;
    return true;
}

bool parse_quad(Cursor& cur, double quad[4]) {
    if (!cur.accept('[')) return false;
    for (int i = 0; i < 4; ++i) {
        if (i > 0 && !cur.accept(',')) return false;
        if (!parse_number(cur, quad[i])) return false;
    }
    return cur.accept(']');
}

// Parses a complete list-of-quadruples starting at cur.pos.
bool parse_list(Cursor& cur, std::vector<std::array<double, 4>>& out) {
    if (!cur.accept('[')) return false;
    cur.skip_ws();
    if (cur.accept(']')) return true;  // "[]"
    while (true) {
        double quad[4];
        if (!parse_quad(cur, quad)) return false;
        out.push_back({quad[0], quad[1], quad[2], quad[3]});
        cur.skip_ws();
        if (cur.accept(']')) return true;
        if (!cur.accept(',')) return false;
    }
}

}  // namespace

std::optional<std::vector<BBox>> parse_boxes(std::string_view text, int width,
                                             int height) {
    // The final answer is the last well-formed list in the text.
    for (std::size_t i = text.size(); i-- > 0;) {
        if (text[i] != '[') continue;
        Cursor cur{text, i};
        std::vector<std::array<double, 4>> raw;
        if (!parse_list(cur, raw)) continue;
        std::vector<BBox> boxes;
        boxes.reserve(raw.size());
        for (const auto& q : raw) {
            BBox box;
            box.x_min = static_cast<int>(std::llround(std::clamp(q[0], 0.0, double(width))));
            box.y_min = static_cast<int>(std::llround(std::clamp(q[1], 0.0, double(height))));
            box.x_max = static_cast<int>(std::llround(std::clamp(q[2], 0.0, double(width))));
            box.y_max = static_cast<int>(std::llround(std::clamp(q[3], 0.0, double(height))));
            if (!box.valid()) return std::nullopt;
            boxes.push_back(box);
        }
        return boxes;
    }
    return std::nullopt;
}

int format_reward(std::string_view text, int width, int height) {
    return parse_boxes(text, width, height).has_value() ? 1 : 0;
}

namespace {

MatchResult filter_pairs(std::vector<MatchedPair> pairs, int n_pred, int n_gt,
                         const RewardConfig& cfg) {
    const double threshold = std::max(0.0, cfg.match_min_iou);
    std::erase_if(pairs,
                  [threshold](const MatchedPair& p) { return p.iou <= threshold; });
    std::sort(pairs.begin(), pairs.end(),
              [](const MatchedPair& a, const MatchedPair& b) {
                  return a.pred < b.pred;
              });
    return MatchResult{std::move(pairs), n_pred, n_gt};
}

// Exact min-cost assignment with potentials; cost(i,j) indexed rows x cols,
// rows <= cols. Returns col index per row.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    const int m = n == 0 ? 0 : static_cast<int>(cost[0].size());
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, kInf);
        std::vector<bool> used(m + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j) {
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    }
    return row_to_col;
}

}  // namespace

MatchResult hungarian_match(const std::vector<BBox>& pred,
                            const std::vector<BBox>& gt,
                            const RewardConfig& cfg) {
    const int n_pred = static_cast<int>(pred.size());
    const int n_gt = static_cast<int>(gt.size());
    if (n_pred == 0 || n_gt == 0) return MatchResult{{}, n_pred, n_gt};

    const bool pred_rows = n_pred <= n_gt;
    const int rows = pred_rows ? n_pred : n_gt;
    const int cols = pred_rows ? n_gt : n_pred;
    std::vector<std::vector<double>> cost(rows, std::vector<double>(cols));
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            const BBox& a = pred_rows ? pred[i] : pred[j];
            const BBox& b = pred_rows ? gt[j] : gt[i];
            cost[i][j] = -iou(a, b);  // maximize IoU
        }
    }
    const std::vector<int> assign = solve_assignment(cost);
    std::vector<MatchedPair> pairs;
    for (int i = 0; i < rows; ++i) {
        if (assign[i] < 0) continue;
        const int pi = pred_rows ? i : assign[i];
        const int gi = pred_rows ? assign[i] : i;
        pairs.push_back(MatchedPair{pi, gi, iou(pred[pi], gt[gi])});
    }
    return filter_pairs(std::move(pairs), n_pred, n_gt, cfg);
}

MatchResult brute_force_match(const std::vector<BBox>& pred,
                              const std::vector<BBox>& gt,
                              const RewardConfig& cfg) {
    const int n_pred = static_cast<int>(pred.size());
    const int n_gt = static_cast<int>(gt.size());
    const int small = std::min(n_pred, n_gt);
    if (small > 8) {
        throw SizeLimitExceeded("brute-force matcher limited to min(N, M) <= 8");
    }
    if (small == 0) return MatchResult{{}, n_pred, n_gt};

    const bool pred_small = n_pred <= n_gt;
    const int large = std::max(n_pred, n_gt);

    std::vector<int> chosen(small, -1);
    std::vector<bool> used(large, false);
    std::vector<int> best(small, -1);
    double best_total = -1.0;

    // Enumerate every injection of the smaller index set into the larger.
    auto dfs = [&](auto&& self, int depth, double total) -> void {
        if (depth == small) {
            if (total > best_total) {
                best_total = total;
                best = chosen;
            }
            return;
        }
        for (int j = 0; j < large; ++j) {
            if (used[j]) continue;
            used[j] = true;
            chosen[depth] = j;
            const BBox& a = pred_small ? pred[depth] : pred[j];
            const BBox& b = pred_small ? gt[j] : gt[depth];
            self(self, depth + 1, total + iou(a, b));
            used[j] = false;
        }
    };
    dfs(dfs, 0, 0.0);

    std::vector<MatchedPair> pairs;
    for (int i = 0; i < small; ++i) {
        const int pi = pred_small ? i : best[i];
        const int gi = pred_small ? best[i] : i;
        pairs.push_back(MatchedPair{pi, gi, iou(pred[pi], gt[gi])});
    }
    return filter_pairs(std::move(pairs), n_pred, n_gt, cfg);
}

RewardBreakdown accuracy_reward(const MatchResult& match,
                                const RewardConfig& cfg) {
    RewardBreakdown out;
    const int n_m = match.n_matched();
    out.precision = match.n_pred > 0 ? double(n_m) / match.n_pred : 0.0;
    out.recall = match.n_gt > 0 ? double(n_m) / match.n_gt : 0.0;
    const double pr = out.precision + out.recall;
    out.f1 = pr > 0.0 ? 2.0 * out.precision * out.recall / pr : 0.0;
    out.mean_iou = n_m > 0 ? match.total_iou() / n_m : 0.0;
    out.r_acc = cfg.lambda1 * out.f1 + cfg.lambda2 * out.mean_iou;
    return out;
}

RewardBreakdown score_boxes(const std::vector<BBox>& pred,
                            const std::vector<BBox>& gt,
                            const RewardConfig& cfg) {
    RewardBreakdown out = accuracy_reward(hungarian_match(pred, gt, cfg), cfg);
    out.r_format = 1;
    out.r_total = (1.0 - cfg.alpha) * out.r_acc + cfg.alpha;
    return out;
}

RewardBreakdown total_reward(std::string_view text, const std::vector<BBox>& gt,
                             const RewardConfig& cfg, int width, int height) {
    const auto pred = parse_boxes(text, width, height);
    if (!pred) {
        return RewardBreakdown{};  // parse failure: every component zero
    }
    return score_boxes(*pred, gt, cfg);
}

}  // namespace dig
