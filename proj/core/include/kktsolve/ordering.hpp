#pragma once

#include "kktsolve/sparse.hpp"

namespace kktsolve {

/// Approximate minimum degree ordering of the graph of A + A^T.
///
/// Quotient-graph elimination with element absorption and the approximate
/// external degree bound |A_i| + |L_p \ i| + sum_e |L_e \ L_p|. Ties break on
/// the lowest node index, so the ordering is deterministic. The diagonal is
/// ignored. Returns perm with perm[k] = node eliminated at step k.
Permutation amd_order(const SparsityPattern& pattern);
Permutation amd_order(const CsMatrix& a);

}  // namespace kktsolve
