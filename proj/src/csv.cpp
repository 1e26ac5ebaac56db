#include <charconv>
#include <fstream>
#include <sstream>

#include "sarma/data.hpp"
#include "sarma/errors.hpp"

namespace sarma {

namespace {

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell.push_back(c);
        }
    }
    cells.push_back(cell);
    return cells;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::string location(std::size_t row, std::size_t col) {
    return "row " + std::to_string(row) + ", column " + std::to_string(col);
}

}  // namespace

Collection parse_collection_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t row = 1;
    if (!std::getline(in, line)) fail(ErrorCode::ParseError, "empty collection file");
    if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    auto ids = split_row(line);
    for (std::size_t c = 0; c < ids.size(); ++c) {
        ids[c] = trim(ids[c]);
        if (ids[c].empty()) fail(ErrorCode::ParseError, "empty series id at " + location(row, c + 1));
    }
    std::vector<Values> columns(ids.size());
    while (std::getline(in, line)) {
        ++row;
        const auto cells = split_row(line);
        if (cells.size() != ids.size()) {
            fail(ErrorCode::ParseError, "expected " + std::to_string(ids.size()) + " cells, found " +
                                            std::to_string(cells.size()) + " at row " +
                                            std::to_string(row));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string cell = trim(cells[c]);
            if (cell.empty()) {
                columns[c].push_back(std::nullopt);
                continue;
            }
            double value = 0.0;
            const char* first = cell.data();
            const char* last = cell.data() + cell.size();
            if (*first == '+') ++first;
            auto [ptr, ec] = std::from_chars(first, last, value);
            if (ec != std::errc() || ptr != last) {
                fail(ErrorCode::ParseError, "invalid number '" + cell + "' at " + location(row, c + 1));
            }
            columns[c].push_back(value);
        }
    }
    Collection out;
    for (std::size_t c = 0; c < ids.size(); ++c) {
        if (columns[c].empty()) fail(ErrorCode::ParseError, "collection has no data rows");
        out.add(TimeSeries{ids[c], std::move(columns[c]), std::nullopt, 0});
    }
    return out;
}

std::string format_collection_csv(const Collection& collection) {
    std::ostringstream out;
    const auto& ids = collection.order;
    for (std::size_t c = 0; c < ids.size(); ++c) out << (c ? "," : "") << ids[c];
    out << '\n';
    const std::size_t rows = collection.max_length();
    char buf[64];
    for (std::size_t t = 0; t < rows; ++t) {
        for (std::size_t c = 0; c < ids.size(); ++c) {
            if (c) out << ',';
            const auto& values = collection.at(ids[c]).values;
            if (t < values.size() && values[t]) {
                // Shortest representation that parses back to the same double.
                auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), *values[t]);
                out.write(buf, ptr - buf);
            }
        }
        out << '\n';
    }
    return out.str();
}

Collection read_collection(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open collection file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_collection_csv(buf.str());
}

void write_collection(const Collection& collection, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write collection file " + path.string());
    out << format_collection_csv(collection);
}

}  // namespace sarma
