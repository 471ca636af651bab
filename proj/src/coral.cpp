#include "wdn/coral.hpp"

#include <vector>

#include "wdn/errors.hpp"
#include "wdn/linalg.hpp"

namespace wdn {

CoralTransform coral_fit(const EmbeddingTable& table, double eta) {
    if (eta < 0) {
        throw DataError("coral_fit: eta must be nonnegative");
    }
    std::map<std::string, std::vector<std::size_t>> controls;
    for (std::size_t r = 0; r < table.size(); ++r) {
        controls[table.records[r].domain];
        if (table.is_control(r)) {
            controls[table.records[r].domain].push_back(r);
        }
    }

    const Eigen::Index dim = table.dim;
    const Eigen::MatrixXd target = Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::MatrixXd target_root = psd_power(target, 0.5, eta);

    CoralTransform out;
    out.eta = eta;
    for (const auto& [domain, rows] : controls) {
        if (rows.size() < 2) {
            throw DataError("coral_fit: domain '" + domain + "' has " + std::to_string(rows.size()) + " negative-control rows, need at least 2");
        }
        Eigen::MatrixXd cov = covariance(table.matrix(rows));
        out.matrices.emplace(domain, psd_power(cov, -0.5, eta) * target_root);
    }
    return out;
}

EmbeddingTable coral_apply(const CoralTransform& t, const EmbeddingTable& table) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(table.size()), table.dim);
    for (std::size_t r = 0; r < table.size(); ++r) {
        const auto& rec = table.records[r];
        auto it = t.matrices.find(rec.domain);
        if (it == t.matrices.end()) {
            throw DataError("coral_apply: unknown domain '" + rec.domain + "'");
        }
        if (it->second.rows() != table.dim) {
            throw DataError("coral_apply: transform dimension does not match table");
        }
        out.row(r) = rec.vector.transpose() * it->second;
    }
    return table.with_vectors(out);
}

Eigen::MatrixXd coral_aligned_covariance(const Eigen::MatrixXd& control_covariance, const Eigen::MatrixXd& matrix) {
    return matrix.transpose() * control_covariance * matrix;
}

}
