#pragma once
// Output plumbing shared by the command layer: diff-friendly CSV ('.'
// decimal, %.17g round-trip floats, no locale, no timestamps), per-step
// cross-path summaries, and whole-file text writes.  Every file starts with
// one comment line carrying the config hash and seed so artifacts are
// traceable to the run that produced them.

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace flowecon {

std::string format_g17(double v);

class CsvWriter {
  public:
    /// Opens the file, writes `# config_hash=0x... seed=...`.  Throws
    /// std::runtime_error when the file cannot be opened.
    CsvWriter(const std::string& path, std::uint64_t config_hash, std::uint64_t seed);

    void header(const std::vector<std::string>& columns);
    void row(std::span<const double> values);
    /// Mixed rows (labels + numbers already formatted by the caller).
    void raw_row(const std::vector<std::string>& fields);
    /// Flushes and throws std::runtime_error if any write failed.
    void close();
    ~CsvWriter();

  private:
    std::string path_;
    std::ofstream out_;
    std::size_t n_columns_ = 0;
    bool closed_ = false;
};

/// Mean and interpolated 10/50/90 percentiles of one cross-path slice.
struct SeriesSummary {
    double mean = 0.0;
    double p10 = 0.0;
    double p50 = 0.0;
    double p90 = 0.0;
};
SeriesSummary summarize(std::vector<double> values);  // throws on empty input

/// Writes the body atomically enough for our purposes (single write, flush,
/// error check).  Used for JSON output.
void write_text_file(const std::string& path, const std::string& body);

}  // namespace flowecon
