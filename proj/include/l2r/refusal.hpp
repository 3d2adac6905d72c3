#pragma once

#include "l2r/retrieval.hpp"

#include <limits>
#include <memory>
#include <span>
#include <string>

namespace l2r {

inline constexpr double kDefaultAlpha = 0.75;
inline constexpr double kNoEvidenceScore = std::numeric_limits<double>::infinity();

struct HardPolicy {
    double alpha = kDefaultAlpha;

    /// Throws ConfigError unless alpha > 0.
    void validate() const;
};

struct HardDecision {
    bool pass = false;
    double min_penalized_score = kNoEvidenceScore;
};

/// Minimum of distance / confidence over hits with confidence > 0, compared
/// strictly against alpha. No eligible hit gives +inf, which never passes.
HardDecision hard_judge(std::span<const RetrievalHit> hits, const HardPolicy& policy) noexcept;

inline HardDecision hard_judge(const RetrievalSet& retrieval, const HardPolicy& policy) noexcept {
    return hard_judge(retrieval.hits, policy);
}

[[nodiscard]] constexpr bool combine(bool i_soft, bool i_hard) noexcept { return i_soft && i_hard; }

struct Judgment {
    bool i_soft = false;
    bool i_hard = false;
    bool i_final = false;
    double min_penalized_score = kNoEvidenceScore;
    double alpha_used = kDefaultAlpha;

    friend bool operator==(const Judgment&, const Judgment&) = default;
};

/// Extension point for the system-level judge. The shipped policy is
/// MinPenalizedScoreJudge.
class JudgePolicy {
public:
    virtual ~JudgePolicy() = default;
    [[nodiscard]] virtual HardDecision judge(const RetrievalSet& retrieval, const HardPolicy& policy) const = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

class MinPenalizedScoreJudge final : public JudgePolicy {
public:
    [[nodiscard]] HardDecision judge(const RetrievalSet& retrieval, const HardPolicy& policy) const override {
        return hard_judge(retrieval, policy);
    }
    [[nodiscard]] std::string name() const override { return "min_penalized_score"; }
};

/// Refusal switches; disabling a gate forces its bit to 1 (ablation runs).
struct RefusalConfig {
    double alpha = kDefaultAlpha;
    bool soft_enabled = true;
    bool hard_enabled = true;
};

}  // namespace l2r
