#ifndef EPICTRL_CSV_HPP
#define EPICTRL_CSV_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace epictrl {

/// Formats a double with enough digits to round-trip bit-exactly.
std::string format_double(double value);

/// Splits one CSV line on commas, trimming blanks and surrounding quotes.
std::vector<std::string> split_csv_line(const std::string& line);

/**
 * @brief Reads a contact matrix CSV in the Socrates export layout.
 *
 * First row: age-class labels (an extra leading cell is tolerated). Each
 * following row: the contacts of one class with every class, optionally
 * preceded by a row label. Parse errors carry 1-based line numbers.
 */
struct ContactCsv {
    std::vector<std::string> labels;
    Eigen::MatrixXd matrix;
};
ContactCsv read_contact_csv(const std::string& path);

/// Two-column (label, count) population CSV; a non-numeric first row is
/// treated as a header.
struct PopulationCsv {
    std::vector<std::string> labels;
    Eigen::VectorXd counts;
};
PopulationCsv read_population_csv(const std::string& path);

/// Writes rows of doubles under a header line.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// Reads back a numeric CSV written by write_csv.
std::vector<std::vector<double>> read_numeric_csv(const std::string& path,
                                                  std::vector<std::string>* header = nullptr);

}  // namespace epictrl

#endif  // EPICTRL_CSV_HPP
