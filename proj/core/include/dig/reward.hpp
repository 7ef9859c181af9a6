#pragma once

#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "dig/geometry.hpp"

namespace dig {

struct RewardConfig {
    double lambda1 = 0.5;       // weight on F1
    double lambda2 = 0.5;       // weight on mean matched IoU
    double alpha = 0.1;         // format-reward weight
    double match_min_iou = 0.0; // pairs must exceed max(0, match_min_iou)
};

struct MatchedPair {
    int pred = 0;
    int gt = 0;
    double iou = 0.0;
};

struct MatchResult {
    std::vector<MatchedPair> pairs;
    int n_pred = 0;
    int n_gt = 0;

    int n_matched() const { return static_cast<int>(pairs.size()); }
    double total_iou() const;
};

struct RewardBreakdown {
    int r_format = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double mean_iou = 0.0;
    double r_acc = 0.0;
    double r_total = 0.0;
};

struct SizeLimitExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Extracts the last bracketed list of coordinate quadruples from free text.
// Coordinates are clamped to the image; an inverted box after clamping, or any
// syntax error, yields an absent result. "[]" is a valid empty prediction.
std::optional<std::vector<BBox>> parse_boxes(std::string_view text, int width,
                                             int height);

int format_reward(std::string_view text, int width, int height);

// Maximum-total-IoU one-to-one assignment (exact O(n^3)), followed by removal
// of pairs whose IoU does not exceed max(0, match_min_iou).
MatchResult hungarian_match(const std::vector<BBox>& pred,
                            const std::vector<BBox>& gt,
                            const RewardConfig& cfg = {});

// Exhaustive assignment oracle; requires min(N, M) <= 8.
MatchResult brute_force_match(const std::vector<BBox>& pred,
                              const std::vector<BBox>& gt,
                              const RewardConfig& cfg = {});

// Fills precision/recall/F1/mean IoU/r_acc; r_format and r_total untouched.
RewardBreakdown accuracy_reward(const MatchResult& match,
                                const RewardConfig& cfg = {});

// Scores an already-structural prediction (r_format fixed at 1).
RewardBreakdown score_boxes(const std::vector<BBox>& pred,
                            const std::vector<BBox>& gt,
                            const RewardConfig& cfg = {});

RewardBreakdown total_reward(std::string_view text, const std::vector<BBox>& gt,
                             const RewardConfig& cfg = {}, int width = 256,
                             int height = 256);

}  // namespace dig
