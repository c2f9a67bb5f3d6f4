#pragma once

#include <string>
#include <vector>

namespace katolab {

/// Shortest round-trip decimal form of a double ('.' decimal point, no
/// locale); used for byte-stable CSV and JSON output.
std::string fmt_double(double v);

/// Minimal CSV accumulator: '.' decimal, LF line endings, no quoting needs.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    void row(const std::vector<std::string>& cells);
    const std::string& body() const { return body_; }

private:
    std::size_t width_;
    std::string body_;
};

} // namespace katolab
