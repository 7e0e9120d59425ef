#pragma once

#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace fevo::jsonl {

using json = nlohmann::json;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Calls fn(line_number, parsed) per line; malformed lines go to on_error and
/// processing continues. Blank lines are skipped.
inline void for_each_line(const std::string& path,
                          const std::function<void(std::size_t, const json&)>& fn,
                          const std::function<void(std::size_t, const std::string&)>& on_error) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json parsed = json::parse(line, nullptr, false);
        if (parsed.is_discarded()) {
            on_error(line_no, line);
            continue;
        }
        fn(line_no, parsed);
    }
}

/// Strict read: any malformed line raises IoError with its line number.
inline std::vector<json> read_all(const std::string& path) {
    std::vector<json> out;
    for_each_line(
        path, [&](std::size_t, const json& j) { out.push_back(j); },
        [&](std::size_t line_no, const std::string&) {
            throw IoError(path + ":" + std::to_string(line_no) + ": malformed JSON line");
        });
    return out;
}

/// One compact JSON object per line. nlohmann keeps object keys sorted, so
/// output bytes are deterministic.
template <typename Range>
void write_all(const std::string& path, const Range& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + path);
    for (const auto& row : rows) {
        out << row.dump() << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace fevo::jsonl
