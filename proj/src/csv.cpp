#include "epictrl/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace epictrl {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end != nullptr && *end == '\0';
}

[[noreturn]] void fail(const std::string& path, int line, const std::string& message) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + message);
}

}  // namespace

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(trim(current));
            current.clear();
        } else {
            current.push_back(ch);
        }
    }
    fields.push_back(trim(current));
    for (auto& f : fields) {
        if (f.size() >= 2 && f.front() == '"' && f.back() == '"') {
            f = f.substr(1, f.size() - 2);
        }
    }
    return fields;
}

ContactCsv read_contact_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open contact matrix file: " + path);
    ContactCsv out;
    std::string line;
    int line_no = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (out.labels.empty() && rows.empty()) {
            double probe;
            if (!parse_double(fields.front(), probe)) {
                // Header row of class labels; drop a leading corner cell.
                double second_probe;
                std::size_t start = 0;
                if (fields.size() >= 2 && !parse_double(fields[1], second_probe) &&
                    fields.front().empty()) {
                    start = 1;
                }
                for (std::size_t idx = start; idx < fields.size(); ++idx) {
                    out.labels.push_back(fields[idx]);
                }
                continue;
            }
        }
        std::vector<double> row;
        for (std::size_t idx = 0; idx < fields.size(); ++idx) {
            double value;
            if (!parse_double(fields[idx], value)) {
                if (idx == 0) continue;  // row label
                fail(path, line_no, "expected a number, got '" + fields[idx] + "'");
            }
            row.push_back(value);
        }
        if (row.empty()) fail(path, line_no, "no numeric entries on row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error(path + ": no matrix rows found");
    const std::size_t n = rows.front().size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != n) {
            throw std::runtime_error(path + ": row " + std::to_string(r + 1) + " has " +
                                     std::to_string(rows[r].size()) + " entries, expected " +
                                     std::to_string(n));
        }
    }
    if (rows.size() != n) {
        throw std::runtime_error(path + ": matrix is " + std::to_string(rows.size()) + "x" +
                                 std::to_string(n) + ", expected square");
    }
    out.matrix.resize(static_cast<int>(n), static_cast<int>(n));
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) out.matrix(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
    }
    return out;
}

PopulationCsv read_population_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open population file: " + path);
    PopulationCsv out;
    std::vector<double> counts;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 2) {
            fail(path, line_no, "expected two columns (label, count), got " +
                                    std::to_string(fields.size()));
        }
        double value;
        if (!parse_double(fields[1], value)) {
            if (counts.empty() && out.labels.empty()) continue;  // header row
            fail(path, line_no, "expected a count, got '" + fields[1] + "'");
        } else {
            out.labels.push_back(fields[0]);
            counts.push_back(value);
        }
    }
    if (counts.empty()) throw std::runtime_error(path + ": no population rows found");
    out.counts = Eigen::Map<Eigen::VectorXd>(counts.data(), static_cast<int>(counts.size()));
    return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t idx = 0; idx < header.size(); ++idx) {
        if (idx) out << ',';
        out << header[idx];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t idx = 0; idx < row.size(); ++idx) {
            if (idx) out << ',';
            out << format_double(row[idx]);
        }
        out << '\n';
    }
}

std::vector<std::vector<double>> read_numeric_csv(const std::string& path,
                                                  std::vector<std::string>* header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (first) {
            first = false;
            if (header != nullptr) *header = fields;
            continue;
        }
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) {
            double value;
            if (!parse_double(f, value)) fail(path, line_no, "expected a number, got '" + f + "'");
            row.push_back(value);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace epictrl
