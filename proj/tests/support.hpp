#ifndef WDN_TESTS_SUPPORT_HPP
#define WDN_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "wdn/data_model.hpp"
#include "wdn/random.hpp"

namespace wdn::testing {

inline Eigen::MatrixXd normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0, double shift = 0.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = shift + scale * standard_normal(rng);
        }
    }
    return m;
}

/// Append one row per line of `values`; wells cycle through `wells` per group.
inline void add_rows(
    EmbeddingTable& table,
    const std::string& domain,
    const std::string& compound,
    const Eigen::MatrixXd& values,
    std::optional<std::string> moa = std::nullopt,
    const std::string& plate = "",
    int wells = 1,
    const std::string& dose = "1")
{
    table.dim = values.cols();
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        EmbeddingRecord rec;
        rec.row_id = "r" + std::to_string(table.records.size());
        rec.domain = domain;
        rec.plate = plate.empty() ? "P_" + domain : plate;
        rec.well = compound + "_" + domain + "_w" + std::to_string(i % wells);
        rec.compound = compound;
        rec.dose = dose;
        rec.treatment = make_treatment(compound, dose);
        rec.moa = compound == table.negative_control_compound ? std::nullopt : moa;
        rec.vector = values.row(i).transpose();
        table.records.push_back(std::move(rec));
    }
}

/// Rows of `table` belonging to `compound` in `domain`, as a matrix.
inline Eigen::MatrixXd rows_of(const EmbeddingTable& table, const std::string& domain, const std::string& compound) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < table.size(); ++r) {
        if (table.records[r].domain == domain && table.records[r].compound == compound) {
            rows.push_back(r);
        }
    }
    return table.matrix(rows);
}

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

}

#endif
