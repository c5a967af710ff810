#pragma once

#include <filesystem>

#include "kktsolve/sparse.hpp"

namespace kktsolve {

/// Reads a coordinate real (or integer) general/symmetric Matrix Market file.
/// Symmetric files become symmetric-lower matrices; entries above the
/// diagonal in a symmetric file are mirrored. Throws ParseError with the line
/// number on malformed input.
CsMatrix load_matrix_market(const std::filesystem::path& path);

/// Writes `coordinate real general` or, for symmetric-lower matrices,
/// `coordinate real symmetric`, with round-trip precision.
void write_matrix_market(const std::filesystem::path& path, const CsMatrix& a);

/// Dense vector as an `array real general` n x 1 file. The reader also
/// accepts a coordinate n x 1 file.
Vector load_vector_market(const std::filesystem::path& path);
void write_vector_market(const std::filesystem::path& path, std::span<const double> v);

}  // namespace kktsolve
