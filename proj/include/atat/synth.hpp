#pragma once

#include <vector>

#include "atat/signal.hpp"

namespace atat {

// Built-in sinusoid+burst fixture: band-limited oscillatory "EEG" and
// burst-modulated high-frequency "EMG", used for the self-contained training
// and benchmark runs when no external segment pools are supplied.

Segment make_synthetic_eeg(Rng& rng, const std::string& id);
Segment make_synthetic_emg(Rng& rng, const std::string& id);

std::vector<Segment> make_synthetic_pool(SegmentKind kind, int count, Rng& rng,
                                         const std::string& id_prefix);

// Indices of the top variance quartile of an artifact pool (the
// "high-variance EMG" selection rule).
std::vector<size_t> high_variance_quartile(const std::vector<Segment>& pool);

}  // namespace atat
