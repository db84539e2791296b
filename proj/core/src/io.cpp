#include "d2lv/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "d2lv/errors.hpp"

namespace d2lv::io {

namespace {

constexpr char kMagic[4] = {'D', '2', 'L', 'V'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::ostream& out, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) {
        throw IoError("write failed");
    }
}

void put_u16(std::ostream& out, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>(v >> 8)};
    put_bytes(out, b, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) {
        b[i] = static_cast<unsigned char>(v >> (8 * i));
    }
    put_bytes(out, b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<unsigned char>(v >> (8 * i));
    }
    put_bytes(out, b, 8);
}

void put_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

void put_string(std::ostream& out, const std::string& s) {
    if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
        throw IoError("string field longer than 65535 bytes");
    }
    put_u16(out, static_cast<std::uint16_t>(s.size()));
    put_bytes(out, s.data(), s.size());
}

void get_bytes(std::istream& in, void* data, std::size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw TruncationError("stream ended inside a feature store payload");
    }
}

std::uint16_t get_u16(std::istream& in) {
    unsigned char b[2];
    get_bytes(in, b, 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    get_bytes(in, b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    }
    return v;
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    get_bytes(in, b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    return v;
}

float get_f32(std::istream& in) {
    std::uint32_t bits = get_u32(in);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::string get_string(std::istream& in) {
    std::uint16_t len = get_u16(in);
    std::string s(len, '\0');
    if (len > 0) {
        get_bytes(in, s.data(), len);
    }
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r') {
        fields.back().pop_back();
    }
    return fields;
}

} // namespace

void write_feature_store(const FeatureStore& store, std::ostream& sink) {
    put_bytes(sink, kMagic, 4);
    put_u32(sink, kVersion);
    put_u64(sink, store.size());
    put_u32(sink, store.dim());
    for (const FeatureRecord& rec : store.records()) {
        put_string(sink, rec.image.str());
        put_string(sink, rec.patch);
        put_string(sink, rec.model);
        put_u32(sink, rec.scale);
        for (float v : rec.vector) {
            put_f32(sink, v);
        }
    }
    sink.flush();
}

FeatureStore read_feature_store(std::istream& source) {
    char magic[4];
    source.read(magic, 4);
    if (source.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("not a feature store: bad magic bytes");
    }
    std::uint32_t version = get_u32(source);
    if (version != kVersion) {
        throw FormatError("unsupported feature store version " + std::to_string(version));
    }
    std::uint64_t count = get_u64(source);
    std::uint32_t dim = get_u32(source);
    if (dim == 0) {
        throw CorruptionError("feature store declares dimension 0");
    }
    FeatureStore store(dim);
    for (std::uint64_t i = 0; i < count; ++i) {
        FeatureRecord rec;
        std::string image = get_string(source);
        rec.patch = get_string(source);
        rec.model = get_string(source);
        rec.scale = get_u32(source);
        rec.vector.resize(dim);
        for (std::uint32_t d = 0; d < dim; ++d) {
            float v = get_f32(source);
            if (!std::isfinite(v)) {
                throw CorruptionError("non-finite float in record " + std::to_string(i));
            }
            rec.vector[d] = v;
        }
        try {
            rec.image = ImageId(image);
            store.append(std::move(rec));
        } catch (const DomainError& e) {
            throw CorruptionError(std::string("record ") + std::to_string(i) + ": " + e.what());
        }
    }
    return store;
}

void save_feature_store(const FeatureStore& store, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    write_feature_store(store, out);
}

FeatureStore load_feature_store(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return read_feature_store(in);
}

void write_pairs(const std::vector<PairScore>& pairs, std::ostream& sink) {
    sink << "query_id,reference_id,score\n";
    char buf[32];
    for (const PairScore& p : pairs) {
        std::snprintf(buf, sizeof(buf), "%.6f", p.score);
        sink << p.query.str() << ',' << p.reference.str() << ',' << buf << '\n';
    }
    if (!sink) {
        throw IoError("pair CSV write failed");
    }
}

std::vector<PairScore> read_pairs(std::istream& source) {
    std::string line;
    if (!std::getline(source, line)) {
        throw FormatError("pair CSV is empty");
    }
    auto header = split_csv_line(line);
    if (header != std::vector<std::string>{"query_id", "reference_id", "score"}) {
        throw FormatError("pair CSV header mismatch");
    }
    std::vector<PairScore> pairs;
    std::size_t line_no = 1;
    while (std::getline(source, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != 3) {
            throw FormatError("pair CSV line " + std::to_string(line_no) + ": expected 3 fields");
        }
        char* end = nullptr;
        double score = std::strtod(fields[2].c_str(), &end);
        if (end == fields[2].c_str() || !std::isfinite(score)) {
            throw FormatError("pair CSV line " + std::to_string(line_no) + ": bad score");
        }
        pairs.push_back(PairScore{ImageId(fields[0]), ImageId(fields[1]), score});
    }
    return pairs;
}

void save_pairs(const std::vector<PairScore>& pairs, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    write_pairs(pairs, out);
}

std::vector<PairScore> load_pairs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return read_pairs(in);
}

void write_ground_truth(const std::vector<std::pair<ImageId, ImageId>>& pairs,
                        std::ostream& sink) {
    sink << "query_id,reference_id\n";
    for (const auto& [q, r] : pairs) {
        sink << q.str() << ',' << r.str() << '\n';
    }
    if (!sink) {
        throw IoError("ground-truth CSV write failed");
    }
}

std::vector<std::pair<ImageId, ImageId>> read_ground_truth(std::istream& source) {
    std::string line;
    if (!std::getline(source, line)) {
        throw FormatError("ground-truth CSV is empty");
    }
    auto header = split_csv_line(line);
    if (header != std::vector<std::string>{"query_id", "reference_id"}) {
        throw FormatError("ground-truth CSV header mismatch");
    }
    std::vector<std::pair<ImageId, ImageId>> pairs;
    std::size_t line_no = 1;
    while (std::getline(source, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != 2) {
            throw FormatError("ground-truth CSV line " + std::to_string(line_no) +
                              ": expected 2 fields");
        }
        pairs.emplace_back(ImageId(fields[0]), ImageId(fields[1]));
    }
    return pairs;
}

std::vector<std::pair<ImageId, ImageId>> load_ground_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return read_ground_truth(in);
}

void write_ppm(const ImageBuffer& img, std::ostream& sink) {
    if (!img.valid()) {
        throw DomainError("write_ppm: invalid image");
    }
    sink << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    put_bytes(sink, img.data.data(), img.data.size());
    sink.flush();
}

ImageBuffer read_ppm(std::istream& source) {
    std::string magic;
    source >> magic;
    if (magic != "P6") {
        throw FormatError("not a binary PPM (P6) stream");
    }
    auto next_int = [&source]() {
        // skip whitespace and '#' comments between header tokens
        int c;
        while ((c = source.peek()) != EOF) {
            if (c == '#') {
                source.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
            } else if (std::isspace(c)) {
                source.get();
            } else {
                break;
            }
        }
        long v = -1;
        source >> v;
        if (!source || v < 0) {
            throw FormatError("bad PPM header");
        }
        return v;
    };
    long w = next_int();
    long h = next_int();
    long maxval = next_int();
    if (w < 1 || h < 1 || maxval != 255) {
        throw FormatError("unsupported PPM geometry or maxval");
    }
    source.get(); // single whitespace after maxval
    ImageBuffer img(static_cast<int>(w), static_cast<int>(h));
    source.read(reinterpret_cast<char*>(img.data.data()),
                static_cast<std::streamsize>(img.data.size()));
    if (static_cast<std::size_t>(source.gcount()) != img.data.size()) {
        throw TruncationError("PPM pixel payload truncated");
    }
    return img;
}

void save_ppm(const ImageBuffer& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    write_ppm(img, out);
}

ImageBuffer load_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return read_ppm(in);
    } catch (const Error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

} // namespace d2lv::io
