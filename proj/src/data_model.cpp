#include "wdn/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "wdn/errors.hpp"

namespace wdn {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string quote_field(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) {
        return "";
    }
    auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

}

std::string format_double(double value) {
    char buffer[64];
    auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

std::optional<double> parse_double(const std::string& text) {
    std::string t = trim(text);
    if (t.empty()) {
        return std::nullopt;
    }
    const char* begin = t.data();
    if (*begin == '+') {
        ++begin;
    }
    double value = 0;
    auto result = std::from_chars(begin, t.data() + t.size(), value);
    if (result.ec != std::errc() || result.ptr != t.data() + t.size()) {
        return std::nullopt;
    }
    return value;
}

Eigen::MatrixXd EmbeddingTable::matrix() const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(records.size()), dim);
    for (std::size_t r = 0; r < records.size(); ++r) {
        out.row(r) = records[r].vector.transpose();
    }
    return out;
}

Eigen::MatrixXd EmbeddingTable::matrix(const std::vector<std::size_t>& rows) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.row(r) = records[rows[r]].vector.transpose();
    }
    return out;
}

std::vector<std::size_t> EmbeddingTable::control_rows() const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < records.size(); ++r) {
        if (is_control(r)) {
            out.push_back(r);
        }
    }
    return out;
}

EmbeddingTable EmbeddingTable::with_vectors(const Eigen::MatrixXd& values) const {
    if (values.rows() != static_cast<Eigen::Index>(records.size())) {
        throw DataError("with_vectors: expected " + std::to_string(records.size()) + " rows, got " + std::to_string(values.rows()));
    }
    EmbeddingTable out;
    out.dim = values.cols();
    out.negative_control_compound = negative_control_compound;
    out.records = records;
    for (std::size_t r = 0; r < records.size(); ++r) {
        out.records[r].vector = values.row(r).transpose();
    }
    return out;
}

EmbeddingTable EmbeddingTable::subset(const std::vector<std::size_t>& rows) const {
    EmbeddingTable out;
    out.dim = dim;
    out.negative_control_compound = negative_control_compound;
    out.records.reserve(rows.size());
    for (auto r : rows) {
        out.records.push_back(records.at(r));
    }
    return out;
}

void EmbeddingTable::validate() const {
    if (dim <= 0) {
        throw DataError("table dimension must be positive");
    }
    std::unordered_set<std::string> ids;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.vector.size() != dim) {
            throw DataError("row " + std::to_string(r + 1) + ": vector has dimension " + std::to_string(rec.vector.size()) + ", expected " + std::to_string(dim));
        }
        if (rec.treatment != make_treatment(rec.compound, rec.dose)) {
            throw DataError("row " + std::to_string(r + 1) + ": treatment '" + rec.treatment + "' does not match compound@dose");
        }
        if (!ids.insert(rec.row_id).second) {
            throw DataError("row " + std::to_string(r + 1) + ": duplicate row_id '" + rec.row_id + "'");
        }
    }
}

TableSchema load_schema(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open schema file " + path.string());
    }
    TableSchema schema;
    std::unordered_map<std::string, std::string*> slots{
        {"row_id", &schema.row_id},
        {"domain", &schema.domain},
        {"plate", &schema.plate},
        {"well", &schema.well},
        {"compound", &schema.compound},
        {"dose", &schema.dose},
        {"treatment", &schema.treatment},
        {"moa", &schema.moa},
        {"embedding_prefix", &schema.embedding_prefix},
        {"negative_control", &schema.negative_control},
    };

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DataError("schema line " + std::to_string(lineno) + ": expected key = value");
        }
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        auto it = slots.find(key);
        if (it == slots.end()) {
            throw DataError("schema line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        *(it->second) = value;
    }
    return schema;
}

EmbeddingTable parse_table(const std::string& contents, const TableSchema& schema) {
    std::istringstream in(contents);
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("empty table: missing header");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    auto header = split_csv_line(line);
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t c = 0; c < header.size(); ++c) {
        position[header[c]] = c;
    }

    auto required = [&](const std::string& name) -> std::size_t {
        auto it = position.find(name);
        if (it == position.end()) {
            throw DataError("missing column '" + name + "'");
        }
        return it->second;
    };
    auto optional = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = position.find(name);
        if (it == position.end()) {
            return std::nullopt;
        }
        return it->second;
    };

    const auto c_row = required(schema.row_id);
    const auto c_domain = required(schema.domain);
    const auto c_plate = required(schema.plate);
    const auto c_well = required(schema.well);
    const auto c_compound = required(schema.compound);
    const auto c_dose = required(schema.dose);
    const auto c_treatment = optional(schema.treatment);
    const auto c_moa = optional(schema.moa);

    std::vector<std::size_t> embedding_columns;
    while (true) {
        auto it = position.find(schema.embedding_prefix + std::to_string(embedding_columns.size()));
        if (it == position.end()) {
            break;
        }
        embedding_columns.push_back(it->second);
    }
    if (embedding_columns.empty()) {
        throw DataError("missing column '" + schema.embedding_prefix + "0'");
    }

    EmbeddingTable table;
    table.dim = static_cast<Eigen::Index>(embedding_columns.size());
    table.negative_control_compound = schema.negative_control;

    std::unordered_set<std::string> seen;
    std::size_t rowno = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        ++rowno;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw DataError("row " + std::to_string(rowno) + ": expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        }

        EmbeddingRecord rec;
        rec.row_id = fields[c_row];
        rec.domain = fields[c_domain];
        rec.plate = fields[c_plate];
        rec.well = fields[c_well];
        rec.compound = fields[c_compound];
        rec.dose = fields[c_dose];
        rec.treatment = make_treatment(rec.compound, rec.dose);
        if (c_treatment && !fields[*c_treatment].empty() && fields[*c_treatment] != rec.treatment) {
            throw DataError("row " + std::to_string(rowno) + ": treatment '" + fields[*c_treatment] + "' does not match compound@dose '" + rec.treatment + "'");
        }
        if (c_moa && !fields[*c_moa].empty()) {
            rec.moa = fields[*c_moa];
        }

        rec.vector.resize(table.dim);
        for (std::size_t e = 0; e < embedding_columns.size(); ++e) {
            const auto& cell = fields[embedding_columns[e]];
            auto value = parse_double(cell);
            if (!value) {
                throw DataError("row " + std::to_string(rowno) + ": non-numeric value '" + cell + "' in column '" + header[embedding_columns[e]] + "'");
            }
            rec.vector[e] = *value;
        }

        if (!seen.insert(rec.row_id).second) {
            throw DataError("row " + std::to_string(rowno) + ": duplicate row_id '" + rec.row_id + "'");
        }
        table.records.push_back(std::move(rec));
    }

    return table;
}

EmbeddingTable load_table(const std::filesystem::path& path, const TableSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open table " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_table(buffer.str(), schema);
}

std::string format_table(const EmbeddingTable& table, const TableSchema& schema) {
    std::string out;
    out += quote_field(schema.row_id) + "," + quote_field(schema.domain) + "," + quote_field(schema.plate) + "," + quote_field(schema.well) + "," +
        quote_field(schema.compound) + "," + quote_field(schema.dose) + "," + quote_field(schema.treatment) + "," + quote_field(schema.moa);
    for (Eigen::Index e = 0; e < table.dim; ++e) {
        out += "," + schema.embedding_prefix + std::to_string(e);
    }
    out += "\n";

    for (const auto& rec : table.records) {
        out += quote_field(rec.row_id) + "," + quote_field(rec.domain) + "," + quote_field(rec.plate) + "," + quote_field(rec.well) + "," +
            quote_field(rec.compound) + "," + quote_field(rec.dose) + "," + quote_field(rec.treatment) + "," + quote_field(rec.moa.value_or(""));
        for (Eigen::Index e = 0; e < table.dim; ++e) {
            out += ",";
            out += format_double(rec.vector[e]);
        }
        out += "\n";
    }
    return out;
}

void save_table(const EmbeddingTable& table, const std::filesystem::path& path, const TableSchema& schema) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write table " + path.string());
    }
    out << format_table(table, schema);
    if (!out) {
        throw DataError("failed writing table " + path.string());
    }
}

std::map<GroupKey, std::vector<std::size_t>> group_index(const EmbeddingTable& table) {
    std::map<GroupKey, std::vector<std::size_t>> out;
    for (std::size_t r = 0; r < table.records.size(); ++r) {
        const auto& rec = table.records[r];
        out[{rec.treatment, rec.domain}].push_back(r);
    }
    return out;
}

std::vector<ReplicatedTreatment> replicated_treatments(const EmbeddingTable& table) {
    std::map<std::string, std::set<std::string>> domains;
    for (const auto& rec : table.records) {
        domains[rec.treatment].insert(rec.domain);
    }
    std::vector<ReplicatedTreatment> out;
    for (auto& [treatment, ds] : domains) {
        if (ds.size() >= 2) {
            out.push_back({treatment, std::vector<std::string>(ds.begin(), ds.end())});
        }
    }
    return out;
}

std::vector<std::string> domains_of(const EmbeddingTable& table) {
    std::set<std::string> ds;
    for (const auto& rec : table.records) {
        ds.insert(rec.domain);
    }
    return std::vector<std::string>(ds.begin(), ds.end());
}

}
