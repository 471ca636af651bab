#include "wdn/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "wdn/errors.hpp"
#include "wdn/wdn_train.hpp"

namespace wdn {

using nlohmann::json;

namespace {

json flat_row_major(const Eigen::MatrixXd& m) {
    std::vector<double> values;
    values.reserve(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            values.push_back(m(i, j));
        }
    }
    return values;
}

json vector_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::MatrixXd matrix_from(const json& node, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
    auto values = node.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
        throw DataError("checkpoint field '" + what + "' has " + std::to_string(values.size()) + " values, expected " + std::to_string(rows * cols));
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = values[i * cols + j];
        }
    }
    return m;
}

Eigen::VectorXd vector_from(const json& node, Eigen::Index size, const std::string& what) {
    auto values = node.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != size) {
        throw DataError("checkpoint field '" + what + "' has " + std::to_string(values.size()) + " values, expected " + std::to_string(size));
    }
    return Eigen::Map<Eigen::VectorXd>(values.data(), size);
}

void expect_kind(const Checkpoint& c, const std::string& kind) {
    if (c.kind != kind) {
        throw DataError("expected checkpoint of kind '" + kind + "', found '" + c.kind + "'");
    }
}

const std::vector<std::string> header_fields{"version", "kind", "step", "dim", "config_fingerprint"};

}

json to_json(const Checkpoint& c) {
    json doc = c.params;
    doc["version"] = c.version;
    doc["kind"] = c.kind;
    doc["step"] = c.step;
    doc["dim"] = c.dim;
    doc["config_fingerprint"] = c.config_fingerprint;
    return doc;
}

Checkpoint checkpoint_from_json(const json& doc) {
    try {
        Checkpoint c;
        c.version = doc.at("version").get<int>();
        if (c.version != checkpoint_format_version) {
            throw DataError("unsupported checkpoint version " + std::to_string(c.version));
        }
        c.kind = doc.at("kind").get<std::string>();
        c.step = doc.at("step").get<std::int64_t>();
        c.dim = doc.at("dim").get<Eigen::Index>();
        c.config_fingerprint = doc.value("config_fingerprint", "");
        c.params = doc;
        for (const auto& field : header_fields) {
            c.params.erase(field);
        }
        return c;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
}

void write_file_atomically(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DataError("cannot write " + tmp.string());
        }
        out << contents;
        if (!out) {
            throw DataError("failed writing " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    write_file_atomically(path, to_json(checkpoint).dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open checkpoint " + path.string());
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError("cannot parse checkpoint " + path.string() + ": " + e.what());
    }
    return checkpoint_from_json(doc);
}

Checkpoint make_checkpoint(const WdnModel& model, std::int64_t step, const std::string& fingerprint) {
    Checkpoint c;
    c.kind = "wdn";
    c.step = step;
    c.dim = model.dim;
    c.config_fingerprint = fingerprint;
    c.params["loss_mode"] = to_string(model.mode);

    json domains = json::array();
    for (const auto& [id, t] : model.transforms) {
        domains.push_back({{"id", id}, {"M", flat_row_major(t.M)}, {"b", vector_json(t.b)}});
    }
    c.params["domains"] = std::move(domains);

    json critics = json::array();
    for (const auto& [key, net] : model.critics) {
        critics.push_back({
            {"treatment", key.treatment},
            {"d_i", key.d_i},
            {"d_j", key.d_j},
            {"hidden", net.hidden()},
            {"W1", flat_row_major(net.W1)},
            {"b1", vector_json(net.b1)},
            {"w2", vector_json(net.w2)},
            {"b2", net.b2},
        });
    }
    c.params["critics"] = std::move(critics);
    return c;
}

WdnModel wdn_from_checkpoint(const Checkpoint& c) {
    expect_kind(c, "wdn");
    try {
        WdnModel model;
        model.dim = c.dim;
        model.mode = loss_mode_from_string(c.params.value("loss_mode", "pairwise"));
        for (const auto& d : c.params.at("domains")) {
            auto id = d.at("id").get<std::string>();
            AffineTransform t{matrix_from(d.at("M"), c.dim, c.dim, "domains[" + id + "].M"), vector_from(d.at("b"), c.dim, "domains[" + id + "].b")};
            model.transforms.emplace(id, std::move(t));
        }
        for (const auto& entry : c.params.value("critics", json::array())) {
            CriticKey key{entry.at("treatment").get<std::string>(), entry.at("d_i").get<std::string>(), entry.at("d_j").get<std::string>()};
            const Eigen::Index hidden = entry.value("hidden", static_cast<Eigen::Index>(entry.at("b1").size()));
            CriticNet net;
            net.W1 = matrix_from(entry.at("W1"), hidden, c.dim, "W1");
            net.b1 = vector_from(entry.at("b1"), hidden, "b1");
            net.w2 = vector_from(entry.at("w2"), hidden, "w2");
            net.b2 = entry.at("b2").get<double>();
            model.critics.emplace(std::move(key), std::move(net));
        }
        return model;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed wdn checkpoint: ") + e.what());
    }
}

Checkpoint make_checkpoint(const CoralTransform& transform, Eigen::Index dim) {
    Checkpoint c;
    c.kind = "coral";
    c.dim = dim;
    c.params["eta"] = transform.eta;
    c.params["target_cov_identity"] = transform.target_cov_identity;
    json domains = json::array();
    for (const auto& [id, m] : transform.matrices) {
        domains.push_back({{"id", id}, {"matrix", flat_row_major(m)}});
    }
    c.params["domains"] = std::move(domains);
    return c;
}

CoralTransform coral_from_checkpoint(const Checkpoint& c) {
    expect_kind(c, "coral");
    try {
        CoralTransform t;
        t.eta = c.params.at("eta").get<double>();
        t.target_cov_identity = c.params.value("target_cov_identity", true);
        for (const auto& d : c.params.at("domains")) {
            t.matrices.emplace(d.at("id").get<std::string>(), matrix_from(d.at("matrix"), c.dim, c.dim, "matrix"));
        }
        return t;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed coral checkpoint: ") + e.what());
    }
}

Checkpoint make_checkpoint(const TvnTransform& transform) {
    Checkpoint c;
    c.kind = "tvn";
    c.dim = transform.mean.size();
    c.params["mean"] = vector_json(transform.mean);
    c.params["whitener"] = flat_row_major(transform.whitener);
    return c;
}

TvnTransform tvn_from_checkpoint(const Checkpoint& c) {
    expect_kind(c, "tvn");
    try {
        return {vector_from(c.params.at("mean"), c.dim, "mean"), matrix_from(c.params.at("whitener"), c.dim, c.dim, "whitener")};
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed tvn checkpoint: ") + e.what());
    }
}

Checkpoint make_checkpoint(const PercentileScaler& scaler, Eigen::Index dim) {
    Checkpoint c;
    c.kind = "percentile";
    c.dim = dim;
    json plates = json::array();
    for (const auto& [plate, anchors] : scaler.plates) {
        plates.push_back({{"plate", plate}, {"p01", vector_json(anchors.p01)}, {"p99", vector_json(anchors.p99)}});
    }
    c.params["plates"] = std::move(plates);
    return c;
}

PercentileScaler percentile_from_checkpoint(const Checkpoint& c) {
    expect_kind(c, "percentile");
    try {
        PercentileScaler s;
        for (const auto& p : c.params.at("plates")) {
            s.plates.emplace(p.at("plate").get<std::string>(), PercentileScaler::Anchors{vector_from(p.at("p01"), c.dim, "p01"), vector_from(p.at("p99"), c.dim, "p99")});
        }
        return s;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed percentile checkpoint: ") + e.what());
    }
}

Checkpoint make_checkpoint(const PcaProjection& projection) {
    Checkpoint c;
    c.kind = "pca";
    c.dim = projection.mean.size();
    c.params["k"] = projection.components.rows();
    c.params["mean"] = vector_json(projection.mean);
    c.params["components"] = flat_row_major(projection.components);
    return c;
}

PcaProjection pca_from_checkpoint(const Checkpoint& c) {
    expect_kind(c, "pca");
    try {
        const auto k = c.params.at("k").get<Eigen::Index>();
        return {vector_from(c.params.at("mean"), c.dim, "mean"), matrix_from(c.params.at("components"), k, c.dim, "components")};
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed pca checkpoint: ") + e.what());
    }
}

EmbeddingTable apply_checkpoint(const Checkpoint& c, const EmbeddingTable& table) {
    if (c.kind == "wdn") {
        return wdn_apply(wdn_from_checkpoint(c), table);
    }
    if (c.kind == "coral") {
        return coral_apply(coral_from_checkpoint(c), table);
    }
    if (c.kind == "tvn") {
        return tvn_apply(tvn_from_checkpoint(c), table);
    }
    if (c.kind == "percentile") {
        return percentile_apply(percentile_from_checkpoint(c), table);
    }
    if (c.kind == "pca") {
        return reduce_dim_apply(pca_from_checkpoint(c), table);
    }
    throw DataError("unknown checkpoint kind '" + c.kind + "'");
}

}
