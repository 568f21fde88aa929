#pragma once

#include "concpos/pipeline.hpp"

#include <json.hpp>

#include <string>

namespace concpos {

using Json = nlohmann::ordered_json;

/// Dense CSV, one matrix row per line, comma separated. Throws InvalidArgument with the offending
/// line on malformed input.
Matrix read_csv_matrix(const std::string& path);
void write_csv_matrix(const std::string& path, const Matrix& M);

/// Columns t, count, p_hat, ci_lo, ci_hi, then ref_<id> for every reference curve.
void write_tail_csv(const std::string& path, const TailCurve& tail);

void write_text(const std::string& path, const std::string& text);

Json to_json(const Vector& v);
Json to_json(const Matrix& M);
Json to_json(const MeanVar& m);
Json to_json(const ConcStats& s);
Json to_json(const TailCurve& t);
Json to_json(const BoundReport& b);
Json to_json(const JohnResult& j);
Json to_json(const IsotropyReport& r);
Json to_json(const MinimalMResult& r);
Json to_json(const BalancedDiagonal& b);
Json to_json(const BalanceCheck& b);
Json to_json(const CubeEmbeddingCertificate& c);
Json to_json(const RudEstimate& r);
Json to_json(const KrTrial& t);
Json to_json(const KrEstimate& k);
Json to_json(const DRBasis& d);
Json to_json(const JohnsonBasis& j);
Json to_json(const TwoLevelFit& f);
Json to_json(const Lift& l);
Json to_json(const SandwichCheck& s);
Json to_json(const PipelineReport& r);
Json to_json(const RudPosition& r);

}  // namespace concpos
