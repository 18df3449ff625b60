#pragma once

#include <vector>

#include "shmm/hmm.hpp"
#include "shmm/matrix.hpp"

namespace shmm {

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method).
/// Returns assignment[row] = column.
std::vector<int> hungarian(const RowMatrix& cost);

/// Matches the states of `estimate` to those of `truth`: result[i] is the
/// estimated state paired with true state i. Similarity is the cosine between
/// text mean directions when both models carry vMF text, otherwise negative
/// squared distance between mean locations.
std::vector<int> align_states(const ShmmModel& truth, const ShmmModel& estimate);

}  // namespace shmm
