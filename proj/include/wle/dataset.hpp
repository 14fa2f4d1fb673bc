#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wle {

struct CsvOptions {
    char delimiter = ',';
    bool header = true;
    std::string label_col;  // empty = all columns numeric
};

struct Dataset {
    std::vector<std::string> columns;  // numeric column names, in file order
    Eigen::MatrixXd values;
    std::vector<std::string> labels;   // empty unless label_col was given
    std::string label_col;
    std::vector<int> rejected_rows;    // 1-based data-row indices with missing cells
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, delim)) {
        // trim surrounding whitespace and CR
        std::size_t b = cell.find_first_not_of(" \t\r");
        std::size_t e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == delim) out.push_back("");
    return out;
}

}  // namespace detail

inline Dataset ingest_csv(const std::string& path, const CsvOptions& opt = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");
    Dataset ds;
    ds.label_col = opt.label_col;
    std::string line;
    int line_no = 0;
    int label_idx = -1;
    int ncols = -1;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::vector<std::string> cells = detail::split_line(line, opt.delimiter);
        if (ncols < 0) {
            ncols = static_cast<int>(cells.size());
            std::vector<std::string> names;
            if (opt.header) {
                names = cells;
            } else {
                for (int j = 0; j < ncols; ++j) names.push_back("c" + std::to_string(j + 1));
            }
            for (int j = 0; j < ncols; ++j) {
                if (!opt.label_col.empty() && names[j] == opt.label_col)
                    label_idx = j;
                else
                    ds.columns.push_back(names[j]);
            }
            if (!opt.label_col.empty() && label_idx < 0)
                throw std::runtime_error("csv: label column '" + opt.label_col + "' not found");
            if (opt.header) continue;
        }
        if (static_cast<int>(cells.size()) != ncols)
            throw std::runtime_error("csv: row at line " + std::to_string(line_no) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(ncols));
        std::vector<double> row;
        row.reserve(ncols);
        std::string label;
        bool missing = false;
        for (int j = 0; j < ncols; ++j) {
            if (j == label_idx) {
                label = cells[j];
                continue;
            }
            if (cells[j].empty()) {
                missing = true;
                continue;
            }
            std::size_t pos = 0;
            double v = 0.0;
            try {
                v = std::stod(cells[j], &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos != cells[j].size())
                throw std::runtime_error("csv: non-numeric cell '" + cells[j] + "' at line " +
                                         std::to_string(line_no) + ", column " +
                                         std::to_string(j + 1));
            row.push_back(v);
        }
        const int data_row = static_cast<int>(rows.size() + ds.rejected_rows.size()) + 1;
        if (missing) {
            ds.rejected_rows.push_back(data_row);
            continue;
        }
        rows.push_back(std::move(row));
        if (label_idx >= 0) ds.labels.push_back(std::move(label));
    }
    if (rows.empty()) throw std::runtime_error("csv: no usable data rows in '" + path + "'");
    const int p = static_cast<int>(rows.front().size());
    ds.values.resize(static_cast<int>(rows.size()), p);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < p; ++j) ds.values(static_cast<int>(i), j) = rows[i][j];
    return ds;
}

}  // namespace wle
