#ifndef WDN_CHECKPOINT_HPP
#define WDN_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "wdn/coral.hpp"
#include "wdn/data_model.hpp"
#include "wdn/preprocess.hpp"
#include "wdn/wdn_model.hpp"

/**
 * @file checkpoint.hpp
 * @brief Versioned JSON container for every fitted transform.
 *
 * All containers share `{version, kind, step, dim, config_fingerprint}`; the kind-specific
 * fields sit next to them at the top level. Doubles are written in shortest round-trip form,
 * so `load(save(x))` restores parameters bit-exactly.
 */

namespace wdn {

inline constexpr int checkpoint_format_version = 1;

struct Checkpoint {
    int version = checkpoint_format_version;
    /// One of "wdn", "coral", "tvn", "percentile", "pca".
    std::string kind;
    std::int64_t step = 0;
    Eigen::Index dim = 0;
    std::string config_fingerprint;
    /// Kind-specific fields.
    nlohmann::json params = nlohmann::json::object();
};

nlohmann::json to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

/// Written to a temporary file and renamed into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const WdnModel& model, std::int64_t step, const std::string& fingerprint);
WdnModel wdn_from_checkpoint(const Checkpoint& checkpoint);

Checkpoint make_checkpoint(const CoralTransform& transform, Eigen::Index dim);
CoralTransform coral_from_checkpoint(const Checkpoint& checkpoint);

Checkpoint make_checkpoint(const TvnTransform& transform);
TvnTransform tvn_from_checkpoint(const Checkpoint& checkpoint);

Checkpoint make_checkpoint(const PercentileScaler& scaler, Eigen::Index dim);
PercentileScaler percentile_from_checkpoint(const Checkpoint& checkpoint);

Checkpoint make_checkpoint(const PcaProjection& projection);
PcaProjection pca_from_checkpoint(const Checkpoint& checkpoint);

/// Dispatch on `kind` and transform every row of `table`.
EmbeddingTable apply_checkpoint(const Checkpoint& checkpoint, const EmbeddingTable& table);

/// Write `contents` to `path` via a temporary sibling and an atomic rename.
void write_file_atomically(const std::filesystem::path& path, const std::string& contents);

}

#endif
