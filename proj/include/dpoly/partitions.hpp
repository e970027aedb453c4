#pragma once

#include <string>
#include <vector>

namespace dpoly {

/// Partition of {1..h} into disjoint blocks, kept in canonical form
/// (blocks ordered by least element, elements increasing).
struct SetPartition {
  int h = 0;
  std::vector<std::vector<int>> blocks;  // elements are 0-based

  int size() const { return int(blocks.size()); }  // |I|
  int block_of(int element) const;
  bool same_block(int k, int l) const { return block_of(k) == block_of(l); }
  /// True if some block has >= 2 elements, i.e. |I| < h.
  bool nontrivial() const { return size() < h; }
  /// The unique pair block, for partitions of shape {k,l} + singletons.
  std::pair<int, int> pair_block() const;

  static SetPartition singletons(int h);
  static SetPartition from_blocks(int h, std::vector<std::vector<int>> blocks);

  bool operator==(const SetPartition& o) const { return h == o.h && blocks == o.blocks; }
  std::string to_string() const;
};

/// All partitions of {1..h}; count is the Bell number. Requires 2 <= h <= 6.
std::vector<SetPartition> partitions(int h);

/// Partitions with exactly m blocks.
std::vector<SetPartition> partitions_with_size(int h, int m);

/// Membership in the sequence set: every element of {1..h} lies in a
/// non-singleton block of some I_i, every I_i is nontrivial, and consecutive
/// equal partitions with |I| = h-1 are forbidden.
bool sequence_valid(const std::vector<SetPartition>& seq);

/// All valid sequences of length 1..k_max (for the moment-bound assembly).
std::vector<std::vector<SetPartition>> valid_sequences(int h, int k_max);

}  // namespace dpoly
