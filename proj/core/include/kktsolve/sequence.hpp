#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kktsolve/seqgen.hpp"
#include "kktsolve/sparse.hpp"

namespace kktsolve {

struct SequenceSystem {
  /// Symmetric KKT matrix.
  CsMatrix K;
  Vector rhs;
};

/// Ordered systems sharing one pattern object.
struct MatrixSequence {
  std::string name;
  std::vector<SequenceSystem> systems;
  /// Size of the primal block. Inferred when the manifest omits it.
  Index n_primal = 0;

  Index dimension() const { return systems.empty() ? 0 : systems.front().K.rows(); }
  /// Stored lower-triangle entries, diagonal included.
  Index nnz_lower() const;
};

/// Loads a JSON manifest {"name", "systems": [{"matrix", "rhs"}], "n_primal"?}
/// with paths relative to the manifest. Throws Error naming the offending
/// system on a pattern mismatch, a missing file or an empty list.
MatrixSequence load_sequence(const std::filesystem::path& manifest);

/// The same sequence built in memory from a barrier trace.
MatrixSequence sequence_from_trace(const BarrierTrace& trace, const std::string& name);

/// Rows of the trailing block with no stored diagonal entry, i.e. the
/// multiplier block of a KKT matrix: returns n such that rows [n, N) have
/// zero diagonal structure and rows [0, n) do not.
Index infer_primal_size(const CsMatrix& k);

}  // namespace kktsolve
