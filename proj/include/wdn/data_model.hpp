#ifndef WDN_DATA_MODEL_HPP
#define WDN_DATA_MODEL_HPP

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

/**
 * @file data_model.hpp
 * @brief Embedding tables, their metadata and CSV ingestion.
 */

namespace wdn {

/**
 * One embedding vector with its experimental metadata.
 * `treatment` is always `compound + "@" + dose` with the dose kept as the original string.
 */
struct EmbeddingRecord {
    std::string row_id;
    std::string domain;
    std::string plate;
    std::string well;
    std::string compound;
    std::string dose;
    std::string treatment;
    std::optional<std::string> moa;
    Eigen::VectorXd vector;
};

/**
 * Ordered collection of records sharing one embedding dimension.
 * Tables are treated as immutable once built; transforms return new tables.
 */
struct EmbeddingTable {
    Eigen::Index dim = 0;
    std::vector<EmbeddingRecord> records;
    std::string negative_control_compound = "DMSO";

    std::size_t size() const {
        return records.size();
    }

    bool is_control(std::size_t row) const {
        return records[row].compound == negative_control_compound;
    }

    /// Rows as an N x dim matrix, in table order.
    Eigen::MatrixXd matrix() const;

    /// Selected rows as a matrix, in the order given.
    Eigen::MatrixXd matrix(const std::vector<std::size_t>& rows) const;

    /// Indices of negative-control rows, in table order.
    std::vector<std::size_t> control_rows() const;

    /// Copy of this table with every vector replaced by the corresponding row of `values`.
    EmbeddingTable with_vectors(const Eigen::MatrixXd& values) const;

    /// Copy of this table keeping only the given rows, in the order given.
    EmbeddingTable subset(const std::vector<std::size_t>& rows) const;

    /// Throws `DataError` if dimensions, treatment labels or row ids are inconsistent.
    void validate() const;
};

/// Canonical treatment label.
inline std::string make_treatment(const std::string& compound, const std::string& dose) {
    return compound + "@" + dose;
}

/**
 * Mapping from logical column roles to header names.
 * Embedding columns are `<embedding_prefix>0 .. <embedding_prefix>{dim-1}`.
 */
struct TableSchema {
    std::string row_id = "row_id";
    std::string domain = "domain";
    std::string plate = "plate";
    std::string well = "well";
    std::string compound = "compound";
    std::string dose = "dose";
    std::string treatment = "treatment";
    std::string moa = "moa";
    std::string embedding_prefix = "e";
    std::string negative_control = "DMSO";
};

/**
 * Read a schema from a `key = value` file; blank lines and `#` comments are ignored.
 * Unknown keys are a `DataError` so that typos do not silently fall back to defaults.
 */
TableSchema load_schema(const std::filesystem::path& path);

/**
 * Parse a CSV embedding table.
 * The treatment and MOA columns are optional; all others are required.
 * Errors name the offending 1-based data row.
 */
EmbeddingTable load_table(const std::filesystem::path& path, const TableSchema& schema = {});

/// Same as `load_table()` but from an in-memory string.
EmbeddingTable parse_table(const std::string& contents, const TableSchema& schema = {});

/// Write a table in the canonical CSV layout with shortest round-trip decimal numbers.
void save_table(const EmbeddingTable& table, const std::filesystem::path& path, const TableSchema& schema = {});

/// Serialize to a CSV string, as written by `save_table()`.
std::string format_table(const EmbeddingTable& table, const TableSchema& schema = {});

/// (treatment, domain)
using GroupKey = std::pair<std::string, std::string>;

/// Row indices for every (treatment, domain) group, each list in table order.
std::map<GroupKey, std::vector<std::size_t>> group_index(const EmbeddingTable& table);

struct ReplicatedTreatment {
    std::string treatment;
    std::vector<std::string> domains;
};

/// Treatments present in at least two domains, sorted by treatment, each with sorted domains.
std::vector<ReplicatedTreatment> replicated_treatments(const EmbeddingTable& table);

/// Sorted distinct domain labels.
std::vector<std::string> domains_of(const EmbeddingTable& table);

/// Shortest decimal representation that parses back to exactly `value`.
std::string format_double(double value);

/// Parse a full string as a double; returns nullopt on any trailing garbage.
std::optional<double> parse_double(const std::string& text);

}

#endif
