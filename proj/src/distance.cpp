#include "dna/analysis.hpp"
#include "dna/csv.hpp"
#include "dna/errors.hpp"
#include "dna/jsonl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

namespace dna {

void DistanceMatrix::validate() const {
    const auto n = labels.size();
    if (static_cast<std::size_t>(m.rows()) != n || static_cast<std::size_t>(m.cols()) != n)
        throw DimensionError("distance matrix shape does not match its labels");
    std::set<std::string> seen(labels.begin(), labels.end());
    if (seen.size() != n) throw DomainError("distance matrix labels are not unique");
    for (std::size_t i = 0; i < n; ++i) {
        if (m(i, i) != 0.0) throw DomainError("distance matrix diagonal must be zero (label '" + labels[i] + "')");
        for (std::size_t j = 0; j < n; ++j) {
            const double v = m(i, j);
            if (!std::isfinite(v) || v < 0.0)
                throw DomainError("distance matrix entries must be finite and non-negative");
            if (v != m(j, i))
                throw DomainError("distance matrix is not symmetric at ('" + labels[i] + "','" + labels[j] + "')");
        }
    }
}

std::size_t DistanceMatrix::index_of(const std::string& label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw DomainError("label '" + label + "' not in distance matrix");
    return static_cast<std::size_t>(it - labels.begin());
}

DistanceMatrix distance_matrix(const DnaStore& store) {
    if (store.size() < 2) throw DomainError("a distance matrix needs at least 2 DNA records");
    std::vector<const DnaRecord*> recs;
    for (const auto& r : store.records()) recs.push_back(&r);
    std::sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->model_id < b->model_id; });
    DistanceMatrix d;
    const auto n = recs.size();
    d.m = Matrix::Zero(n, n);
    for (auto* r : recs) d.labels.push_back(r->model_id);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d.m(i, j) = d.m(j, i) = dna_distance(*recs[i], *recs[j]);
    return d;
}

DistanceMatrix distance_matrix(const std::vector<std::string>& labels, const std::vector<std::vector<double>>& vectors) {
    if (labels.size() != vectors.size()) throw DimensionError("labels and vectors differ in count");
    if (labels.size() < 2) throw DomainError("a distance matrix needs at least 2 vectors");
    const auto n = labels.size();
    DistanceMatrix d{labels, Matrix::Zero(n, n)};
    for (std::size_t i = 0; i < n; ++i) {
        if (vectors[i].size() != vectors[0].size()) throw DimensionError("vectors differ in length");
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < vectors[i].size(); ++k) {
                const double diff = vectors[i][k] - vectors[j][k];
                s += diff * diff;
            }
            d.m(i, j) = d.m(j, i) = std::sqrt(s);
        }
    }
    d.validate();
    return d;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// Splits one CSV record, honouring double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw ParseError("line " + std::to_string(lineno) + ": unterminated quoted field", lineno);
    out.push_back(std::move(cur));
    return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line, lineno));
    }
    return rows;
}

std::string distance_matrix_to_csv(const DistanceMatrix& d) {
    std::string out;
    for (const auto& l : d.labels) out += "," + csv_field(l);
    out += "\n";
    char buf[64];
    for (std::size_t i = 0; i < d.size(); ++i) {
        out += csv_field(d.labels[i]);
        for (std::size_t j = 0; j < d.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.9g", d.m(i, j));
            out += ",";
            out += buf;
        }
        out += "\n";
    }
    return out;
}

DistanceMatrix distance_matrix_from_csv(const std::string& text) {
    const auto rows = parse_csv(text);
    if (rows.empty()) throw ParseError("distance matrix CSV is empty", 1);
    const auto& header = rows[0];
    const std::size_t n = header.size() - 1;
    if (n < 1) throw ParseError("distance matrix CSV header has no labels", 1);
    if (rows.size() != n + 1)
        throw ParseError("distance matrix CSV has " + std::to_string(rows.size() - 1) + " rows for " +
                             std::to_string(n) + " labels",
                         rows.size());
    DistanceMatrix d;
    d.labels.assign(header.begin() + 1, header.end());
    d.m = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = rows[i + 1];
        if (row.size() != n + 1) throw ParseError("row " + std::to_string(i + 2) + " has the wrong field count", i + 2);
        if (row[0] != d.labels[i])
            throw ParseError("row " + std::to_string(i + 2) + " label '" + row[0] + "' does not match column label '" +
                                 d.labels[i] + "'",
                             i + 2);
        for (std::size_t j = 0; j < n; ++j) {
            try {
                std::size_t used = 0;
                d.m(i, j) = std::stod(row[j + 1], &used);
                if (used != row[j + 1].size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw ParseError("row " + std::to_string(i + 2) + ": '" + row[j + 1] + "' is not a number", i + 2);
            }
        }
    }
    d.validate();
    return d;
}

DistanceMatrix load_distance_matrix(const std::filesystem::path& path) {
    return distance_matrix_from_csv(read_text_file(path));
}

void save_distance_matrix(const DistanceMatrix& d, const std::filesystem::path& path) {
    write_text_file(path, distance_matrix_to_csv(d));
}

}  // namespace dna
