#include "epictrl/scenario.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "epictrl/csv.hpp"

namespace epictrl {

std::string controller_name(ControllerKind kind) {
    switch (kind) {
        case ControllerKind::None: return "none";
        case ControllerKind::Linearizing: return "linearizing";
        case ControllerKind::Saturated: return "saturated";
        case ControllerKind::Observer: return "observer";
    }
    return "unknown";
}

ControllerKind controller_from_name(const std::string& name) {
    if (name == "none") return ControllerKind::None;
    if (name == "linearizing") return ControllerKind::Linearizing;
    if (name == "saturated") return ControllerKind::Saturated;
    if (name == "observer") return ControllerKind::Observer;
    throw std::invalid_argument("unknown controller '" + name +
                                "' (expected none|linearizing|saturated|observer)");
}

namespace {

struct KeyedValue {
    std::string value;
    int line = 0;
    bool used = false;
};

using SectionMap = std::map<std::string, std::map<std::string, KeyedValue>>;

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail(const std::string& path, int line, const std::string& message) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + message);
}

SectionMap parse_keyed_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    SectionMap sections;
    std::string section;  // "" = top level
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line.erase(comment);
        const std::string text = trim(line);
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text.back() != ']') fail(path, line_no, "unterminated section header");
            section = trim(text.substr(1, text.size() - 2));
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) fail(path, line_no, "expected 'key = value'");
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.empty()) fail(path, line_no, "empty key");
        if (sections[section].count(key)) {
            fail(path, line_no, "duplicate key '" + key + "' in section [" + section + "]");
        }
        sections[section][key] = {value, line_no, false};
    }
    return sections;
}

class ScenarioReader {
public:
    ScenarioReader(std::string path, SectionMap sections)
        : path_(std::move(path)), sections_(std::move(sections)) {}

    bool has(const std::string& section, const std::string& key) {
        auto sec = sections_.find(section);
        return sec != sections_.end() && sec->second.count(key) > 0;
    }

    std::string get_string(const std::string& section, const std::string& key) {
        KeyedValue& kv = lookup(section, key);
        kv.used = true;
        return kv.value;
    }

    std::string get_string_or(const std::string& section, const std::string& key,
                              const std::string& fallback) {
        return has(section, key) ? get_string(section, key) : fallback;
    }

    double get_double(const std::string& section, const std::string& key) {
        KeyedValue& kv = lookup(section, key);
        kv.used = true;
        return parse_double(kv.value, kv.line);
    }

    double get_double_or(const std::string& section, const std::string& key, double fallback) {
        return has(section, key) ? get_double(section, key) : fallback;
    }

    Eigen::VectorXd get_vector(const std::string& section, const std::string& key) {
        KeyedValue& kv = lookup(section, key);
        kv.used = true;
        std::istringstream stream(kv.value);
        std::vector<double> values;
        std::string token;
        while (stream >> token) values.push_back(parse_double(token, kv.line));
        if (values.empty()) fail(path_, kv.line, "expected at least one number for '" + key + "'");
        return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<int>(values.size()));
    }

    int line_of(const std::string& section, const std::string& key) {
        return lookup(section, key).line;
    }

    [[noreturn]] void fail_at(const std::string& section, const std::string& key,
                              const std::string& msg) {
        fail(path_, lookup(section, key).line, msg);
    }

    void check_all_used() const {
        for (const auto& [section, keys] : sections_) {
            for (const auto& [key, kv] : keys) {
                if (!kv.used) {
                    fail(path_, kv.line,
                         "unknown key '" + key + "' in section [" + section + "]");
                }
            }
        }
    }

private:
    KeyedValue& lookup(const std::string& section, const std::string& key) {
        auto sec = sections_.find(section);
        if (sec == sections_.end() || !sec->second.count(key)) {
            throw std::runtime_error(path_ + ": missing required key '" + key +
                                     "' in section [" + section + "]");
        }
        return sec->second.at(key);
    }

    double parse_double(const std::string& text, int line) {
        char* end = nullptr;
        const double value = std::strtod(text.c_str(), &end);
        if (end == nullptr || *end != '\0') {
            fail(path_, line, "expected a number, got '" + text + "'");
        }
        return value;
    }

    std::string path_;
    SectionMap sections_;
};

// Broadcasts a scalar or length-n vector to length n.
Eigen::VectorXd broadcast(const Eigen::VectorXd& v, int n, ScenarioReader& reader,
                          const std::string& section, const std::string& key) {
    if (v.size() == n) return v;
    if (v.size() == 1) return Eigen::VectorXd::Constant(n, v[0]);
    reader.fail_at(section, key,
                   "expected 1 or " + std::to_string(n) + " values, got " +
                       std::to_string(v.size()));
}

}  // namespace

Scenario load_scenario(const std::string& path) {
    namespace fs = std::filesystem;
    ScenarioReader reader(path, parse_keyed_file(path));
    const fs::path base = fs::path(path).parent_path();

    Scenario sc;
    sc.name = reader.get_string_or("", "name", fs::path(path).stem().string());

    const fs::path contact_path = base / reader.get_string("", "contacts");
    const fs::path population_path = base / reader.get_string("", "population");
    const ContactCsv contacts = read_contact_csv(contact_path.string());
    const PopulationCsv population = read_population_csv(population_path.string());

    const int n = static_cast<int>(population.counts.size());
    if (contacts.matrix.rows() != n) {
        throw std::runtime_error(path + ": contact matrix is " +
                                 std::to_string(contacts.matrix.rows()) + "x" +
                                 std::to_string(contacts.matrix.cols()) + " but " +
                                 std::to_string(n) + " population classes were given");
    }
    sc.class_labels = population.labels;

    sc.params.n = n;
    sc.params.contact = contacts.matrix;
    sc.params.populations = population.counts;
    sc.params.lambda = reader.get_double("model", "lambda");
    sc.params.gamma_r = broadcast(reader.get_vector("model", "gamma_r"), n, reader, "model", "gamma_r");
    sc.params.gamma_d = broadcast(reader.get_vector("model", "gamma_d"), n, reader, "model", "gamma_d");
    sc.params.immun_prob = reader.has("model", "immun_prob")
                               ? broadcast(reader.get_vector("model", "immun_prob"), n, reader,
                                           "model", "immun_prob")
                               : Eigen::VectorXd::Ones(n);

    sc.i0 = broadcast(reader.get_vector("initial", "i0"), n, reader, "initial", "i0");
    sc.r0 = reader.has("initial", "r0")
                ? broadcast(reader.get_vector("initial", "r0"), n, reader, "initial", "r0")
                : Eigen::VectorXd::Zero(n);
    sc.d0 = reader.has("initial", "d0")
                ? broadcast(reader.get_vector("initial", "d0"), n, reader, "initial", "d0")
                : Eigen::VectorXd::Zero(n);

    sc.controller = controller_from_name(reader.get_string_or("control", "controller", "none"));
    sc.margin = reader.get_double_or("control", "margin", 0.1);
    sc.theta_sup = reader.get_double_or("control", "theta_sup", 0.017);
    sc.i_lo = reader.has("control", "i_lo")
                  ? broadcast(reader.get_vector("control", "i_lo"), n, reader, "control", "i_lo")
                  : Eigen::VectorXd::Constant(n, 20.0);
    if (reader.has("control", "s_lo")) {
        sc.s_lo_override = broadcast(reader.get_vector("control", "s_lo"), n, reader, "control", "s_lo");
    }
    if (reader.has("control", "s_hi")) {
        sc.s_hi_override = broadcast(reader.get_vector("control", "s_hi"), n, reader, "control", "s_hi");
    }
    if (reader.has("control", "i_hi")) {
        sc.i_hi_override = broadcast(reader.get_vector("control", "i_hi"), n, reader, "control", "i_hi");
    }

    Eigen::VectorXd beta_row(3);
    beta_row << 6.0, 11.0, 6.0;  // observer poles at {-1,-2,-3}/epsilon
    if (reader.has("observer", "beta")) {
        const Eigen::VectorXd b = reader.get_vector("observer", "beta");
        if (b.size() != 3) reader.fail_at("observer", "beta", "expected three coefficients");
        beta_row = b;
    }
    sc.beta.resize(n, 3);
    for (int k = 0; k < n; ++k) sc.beta.row(k) = beta_row.transpose();
    if (reader.has("observer", "epsilon")) {
        const std::string text = reader.get_string("observer", "epsilon");
        if (text != "auto") {
            char* end = nullptr;
            const double value = std::strtod(text.c_str(), &end);
            if (end == nullptr || *end != '\0' || !(value > 0.0)) {
                reader.fail_at("observer", "epsilon", "expected a positive number or 'auto'");
            }
            sc.epsilon = value;
        }
    }
    sc.i0_hat = reader.has("observer", "i0_hat")
                    ? broadcast(reader.get_vector("observer", "i0_hat"), n, reader, "observer",
                                "i0_hat")
                    : Eigen::VectorXd::Constant(n, 100.0);

    sc.horizon = reader.get_double_or("run", "horizon", 400.0);
    sc.step = reader.get_double_or("run", "step", 0.01);
    sc.output_dir = reader.get_string_or("run", "output", "out");

    reader.check_all_used();

    const bool observer_mode = sc.controller == ControllerKind::Observer;
    validate_params_or_throw(sc.params, observer_mode);

    for (int k = 0; k < n; ++k) {
        const double derived_s0 = sc.params.populations[k] - sc.i0[k] - sc.r0[k] - sc.d0[k];
        if (derived_s0 < 0.0) {
            throw std::runtime_error(path + ": initial I+R+D exceeds the population of class " +
                                     std::to_string(k));
        }
    }
    return sc;
}

}  // namespace epictrl
