#include "flowecon/io.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace flowecon {

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

CsvWriter::CsvWriter(const std::string& path, std::uint64_t config_hash,
                     std::uint64_t seed)
    : path_(path), out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    char head[80];
    std::snprintf(head, sizeof head, "# config_hash=0x%016llx seed=%llu\n",
                  static_cast<unsigned long long>(config_hash),
                  static_cast<unsigned long long>(seed));
    out_ << head;
}

void CsvWriter::header(const std::vector<std::string>& columns) {
    n_columns_ = columns.size();
    for (std::size_t i = 0; i < columns.size(); ++i)
        out_ << columns[i] << (i + 1 < columns.size() ? ',' : '\n');
}

void CsvWriter::row(std::span<const double> values) {
    if (n_columns_ && values.size() != n_columns_)
        throw std::runtime_error(path_ + ": row width " + std::to_string(values.size()) +
                                 " does not match header width " +
                                 std::to_string(n_columns_));
    for (std::size_t i = 0; i < values.size(); ++i)
        out_ << format_g17(values[i]) << (i + 1 < values.size() ? ',' : '\n');
}

void CsvWriter::raw_row(const std::vector<std::string>& fields) {
    if (n_columns_ && fields.size() != n_columns_)
        throw std::runtime_error(path_ + ": row width " + std::to_string(fields.size()) +
                                 " does not match header width " +
                                 std::to_string(n_columns_));
    for (std::size_t i = 0; i < fields.size(); ++i)
        out_ << fields[i] << (i + 1 < fields.size() ? ',' : '\n');
}

void CsvWriter::close() {
    if (closed_) return;
    closed_ = true;
    out_.flush();
    if (!out_) throw std::runtime_error("write failed for " + path_);
    out_.close();
}

CsvWriter::~CsvWriter() {
    // Errors surface through close(); the destructor only tidies up.
    if (!closed_) out_.close();
}

SeriesSummary summarize(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("summarize: empty slice");
    SeriesSummary s;
    double acc = 0.0;
    for (double v : values) acc += v;
    s.mean = acc / double(values.size());
    std::sort(values.begin(), values.end());
    auto quantile = [&](double q) {
        const double pos = q * double(values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double frac = pos - double(lo);
        if (lo + 1 >= values.size()) return values.back();
        return values[lo] + frac * (values[lo + 1] - values[lo]);
    };
    s.p10 = quantile(0.10);
    s.p50 = quantile(0.50);
    s.p90 = quantile(0.90);
    return s;
}

void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << body;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace flowecon
