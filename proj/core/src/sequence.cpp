#include "kktsolve/sequence.hpp"

#include <fstream>
#include <json.hpp>

#include "kktsolve/error.hpp"
#include "kktsolve/matrix_market.hpp"

namespace kktsolve {

Index MatrixSequence::nnz_lower() const {
  if (systems.empty()) return 0;
  const CsMatrix& k = systems.front().K;
  if (k.is_symmetric_lower()) return k.nnz();
  Index count = 0;
  for (Index i = 0; i < k.rows(); ++i) {
    for (Index p = k.row_ptr()[static_cast<std::size_t>(i)]; p < k.row_ptr()[static_cast<std::size_t>(i) + 1]; ++p) {
      if (k.col_idx()[static_cast<std::size_t>(p)] <= i) ++count;
    }
  }
  return count;
}

Index infer_primal_size(const CsMatrix& k) {
  Index n = k.rows();
  while (n > 0 && k.pattern().find(n - 1, n - 1) < 0) --n;
  return n;
}

MatrixSequence load_sequence(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error("load_sequence: cannot open manifest " + manifest.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("load_sequence: " + manifest.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("systems") || !doc["systems"].is_array()) {
    throw ParseError("load_sequence: manifest must be an object with a \"systems\" array");
  }
  MatrixSequence seq;
  seq.name = doc.value("name", manifest.stem().string());
  const auto base = manifest.parent_path();
  const auto& list = doc["systems"];
  if (list.empty()) throw Error("load_sequence: sequence must contain at least one system");

  for (std::size_t k = 0; k < list.size(); ++k) {
    const auto& entry = list[k];
    if (!entry.is_object() || !entry.contains("matrix") || !entry.contains("rhs")) {
      throw ParseError("load_sequence: system " + std::to_string(k) + " needs \"matrix\" and \"rhs\"");
    }
    const auto mpath = base / entry["matrix"].get<std::string>();
    const auto rpath = base / entry["rhs"].get<std::string>();
    for (const auto& p : {mpath, rpath}) {
      if (!std::filesystem::exists(p)) {
        throw Error("load_sequence: system " + std::to_string(k) + ": missing file " + p.string());
      }
    }
    CsMatrix a = load_matrix_market(mpath);
    Vector rhs = load_vector_market(rpath);
    if (!a.is_square()) throw Error("load_sequence: system " + std::to_string(k) + " is not square");
    if (static_cast<Index>(rhs.size()) != a.rows()) {
      throw Error("load_sequence: system " + std::to_string(k) + ": rhs length differs from matrix size");
    }
    if (!seq.systems.empty()) {
      const CsMatrix& first = seq.systems.front().K;
      if (a.symmetry() != first.symmetry() || !a.same_pattern(first)) {
        throw Error("load_sequence: system " + std::to_string(k) + " has a sparsity pattern different from system 0");
      }
      a = first.with_values(Vector(a.values().begin(), a.values().end()));
    }
    seq.systems.push_back({std::move(a), std::move(rhs)});
  }
  const Index dim = seq.dimension();
  if (doc.contains("n_primal")) {
    seq.n_primal = doc["n_primal"].get<Index>();
    if (seq.n_primal < 0 || seq.n_primal > dim) throw ParseError("load_sequence: n_primal out of range");
  } else {
    seq.n_primal = infer_primal_size(seq.systems.front().K);
  }
  return seq;
}

MatrixSequence sequence_from_trace(const BarrierTrace& trace, const std::string& name) {
  if (trace.systems.empty()) throw Error("sequence_from_trace: sequence must contain at least one system");
  MatrixSequence seq;
  seq.name = name;
  seq.n_primal = trace.systems.front().system.n();
  for (const auto& s : trace.systems) seq.systems.push_back({s.system.K, s.rhs.stacked()});
  return seq;
}

}  // namespace kktsolve
