#include "l2r/refusal.hpp"

#include "l2r/errors.hpp"

namespace l2r {

void HardPolicy::validate() const {
    if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
}

HardDecision hard_judge(std::span<const RetrievalHit> hits, const HardPolicy& policy) noexcept {
    double best = kNoEvidenceScore;
    for (const auto& hit : hits) {
        if (!(hit.confidence > 0.0)) continue;
        double score = hit.distance / hit.confidence;
        if (score < best) best = score;
    }
    return {best < policy.alpha, best};
}

}  // namespace l2r
