#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace blochdg {

/// Line-oriented CSV writer. All doubles are written with %.17g so that
/// identical runs produce byte-identical files.
class CsvWriter {
  public:
    explicit CsvWriter(const std::string& path) : f_(std::fopen(path.c_str(), "wb")) {
        if (!f_) throw std::runtime_error("cannot open " + path + " for writing");
    }
    ~CsvWriter() {
        if (f_) std::fclose(f_);
    }
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void header(const std::string& line) { raw(line); }
    void raw(const std::string& line) {
        std::fputs(line.c_str(), f_);
        std::fputc('\n', f_);
    }

    CsvWriter& field(double v) {
        sep();
        std::fprintf(f_, "%.17g", v);
        return *this;
    }
    CsvWriter& field(long long v) {
        sep();
        std::fprintf(f_, "%lld", v);
        return *this;
    }
    CsvWriter& field(int v) { return field(static_cast<long long>(v)); }
    CsvWriter& field(const std::string& v) {
        sep();
        std::fputs(v.c_str(), f_);
        return *this;
    }
    void endrow() {
        std::fputc('\n', f_);
        first_ = true;
    }

  private:
    void sep() {
        if (!first_) std::fputc(',', f_);
        first_ = false;
    }
    std::FILE* f_;
    bool first_ = true;
};

}  // namespace blochdg
