#pragma once

#include <zlib.h>

#include <array>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <streambuf>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace mobfc {

// Raised when a source cannot be opened or read at all.
class SourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace csv {

// Read-only streambuf over zlib's gzFile. gzread passes plain files through
// unchanged, so one code path serves both .csv and .csv.gz inputs.
class GzStreamBuf : public std::streambuf {
public:
    explicit GzStreamBuf(const std::string& path) : file_(gzopen(path.c_str(), "rb")) {
        if (file_ == nullptr) throw SourceError("cannot open " + path);
        gzbuffer(file_, 1 << 16);
    }
    ~GzStreamBuf() override {
        if (file_ != nullptr) gzclose(file_);
    }
    GzStreamBuf(const GzStreamBuf&) = delete;
    GzStreamBuf& operator=(const GzStreamBuf&) = delete;

protected:
    int_type underflow() override {
        if (gptr() < egptr()) return traits_type::to_int_type(*gptr());
        const int n = gzread(file_, buffer_.data(), static_cast<unsigned>(buffer_.size()));
        if (n < 0) {
            int errnum = 0;
            throw SourceError(std::string("read failure: ") + gzerror(file_, &errnum));
        }
        if (n == 0) return traits_type::eof();
        setg(buffer_.data(), buffer_.data(), buffer_.data() + n);
        return traits_type::to_int_type(*gptr());
    }

private:
    gzFile file_;
    std::array<char, 1 << 16> buffer_{};
};

class InputFile {
public:
    explicit InputFile(const std::string& path)
        : buf_(std::make_unique<GzStreamBuf>(path)), stream_(buf_.get()) {}
    std::istream& stream() { return stream_; }

private:
    std::unique_ptr<GzStreamBuf> buf_;
    std::istream stream_;
};

// Streaming RFC-4180-style reader. Field storage is reused between rows, so
// memory use is bounded by the longest row rather than the file size.
class Reader {
public:
    explicit Reader(std::istream& in, char delimiter = ',') : in_(in), delim_(delimiter) {}

    // Returns false at end of input. `line_number()` is the 1-based physical
    // line on which the returned record started.
    bool next(std::vector<std::string>& fields) {
        if (!std::getline(in_, line_)) {
            if (in_.bad()) throw SourceError("read failure");
            return false;
        }
        ++physical_line_;
        record_line_ = physical_line_;
        if (!line_.empty() && line_.back() == '\r') line_.pop_back();

        std::size_t used = 0;
        auto field = [&]() -> std::string& {
            if (used == fields.size()) fields.emplace_back();
            std::string& f = fields[used++];
            f.clear();
            return f;
        };
        std::string* cur = &field();
        bool quoted = false;
        for (std::size_t i = 0;; ++i) {
            if (i == line_.size()) {
                if (!quoted) break;
                // quoted field spans a newline
                if (!std::getline(in_, line_)) break;
                ++physical_line_;
                if (!line_.empty() && line_.back() == '\r') line_.pop_back();
                cur->push_back('\n');
                i = static_cast<std::size_t>(-1);
                continue;
            }
            const char c = line_[i];
            if (quoted) {
                if (c == '"') {
                    if (i + 1 < line_.size() && line_[i + 1] == '"') {
                        cur->push_back('"');
                        ++i;
                    } else {
                        quoted = false;
                    }
                } else {
                    cur->push_back(c);
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == delim_) {
                cur = &field();
            } else {
                cur->push_back(c);
            }
        }
        fields.resize(used);
        return true;
    }

    std::size_t line_number() const { return record_line_; }
    std::size_t buffer_capacity() const { return line_.capacity(); }

private:
    std::istream& in_;
    char delim_;
    std::string line_;
    std::size_t physical_line_ = 0;
    std::size_t record_line_ = 0;
};

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    T value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

// Shortest representation that parses back to the identical double.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

// Fixed-precision formatting for human-facing tables.
inline std::string format_fixed(double v, int precision) {
    std::array<char, 64> buf{};
    auto [ptr, ec] =
        std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, precision);
    return std::string(buf.data(), ptr);
}

inline std::string escape(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << escape(fields[i]);
    }
    out << '\n';
}

}  // namespace csv
}  // namespace mobfc
