#include "blockscramble/dataio.hpp"

#include <png.h>

#include <array>
#include <exception>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "blockscramble/scramble.hpp"

namespace blockscramble {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

std::size_t reflect(long p, std::size_t n) {
    const long len = static_cast<long>(n);
    if (len == 1) return 0;
    const long period = 2 * (len - 1);
    p %= period;
    if (p < 0) p += period;
    return static_cast<std::size_t>(p < len ? p : period - p);
}

} // namespace

std::vector<CifarRecord> read_cifar_records(const std::filesystem::path& path,
                                            CifarVariant variant) {
    const auto bytes = read_file(path);
    const std::size_t rec = cifar_record_size(variant);
    if (bytes.size() % rec != 0) {
        const std::size_t offset = bytes.size() - bytes.size() % rec;
        throw FormatError(path.string() + ": truncated record at byte offset " +
                          std::to_string(offset) + " (file has " + std::to_string(bytes.size()) +
                          " bytes, record size " + std::to_string(rec) + ")");
    }
    const std::size_t classes = cifar_classes(variant);
    const std::size_t plane = kCifarSide * kCifarSide;
    std::vector<CifarRecord> out;
    out.reserve(bytes.size() / rec);
    for (std::size_t offset = 0; offset < bytes.size(); offset += rec) {
        CifarRecord r;
        std::size_t p = offset;
        if (variant == CifarVariant::Cifar100) {
            r.coarse_label = bytes[p++];
            if (r.coarse_label >= 20)
                throw RangeError(path.string() + ": coarse label " +
                                 std::to_string(r.coarse_label) + " at byte offset " +
                                 std::to_string(offset) + " is out of range");
        }
        r.label = bytes[p++];
        if (r.label >= classes)
            throw RangeError(path.string() + ": label " + std::to_string(r.label) +
                             " at byte offset " + std::to_string(offset) + " >= " +
                             std::to_string(classes));
        std::vector<std::uint8_t> px(kCifarPixels);
        for (std::size_t i = 0; i < plane; ++i)
            for (std::size_t c = 0; c < 3; ++c) px[i * 3 + c] = bytes[p + c * plane + i];
        r.image = Image8(kCifarSide, kCifarSide, 3, std::move(px));
        out.push_back(std::move(r));
    }
    return out;
}

void write_cifar_records(const std::filesystem::path& path, std::span<const CifarRecord> records,
                         CifarVariant variant) {
    const std::size_t plane = kCifarSide * kCifarSide;
    std::string buf;
    buf.reserve(records.size() * cifar_record_size(variant));
    for (const auto& r : records) {
        if (r.image.height() != kCifarSide || r.image.width() != kCifarSide ||
            r.image.channels() != 3)
            throw DimensionError("CIFAR records must hold 32x32x3 images");
        if (variant == CifarVariant::Cifar100) buf.push_back(static_cast<char>(r.coarse_label));
        buf.push_back(static_cast<char>(r.label));
        const auto px = r.image.data();
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < plane; ++i) buf.push_back(static_cast<char>(px[i * 3 + c]));
    }
    write_file(path, buf);
}

std::vector<LabeledExample> read_cifar(const std::filesystem::path& path, CifarVariant variant) {
    auto records = read_cifar_records(path, variant);
    std::vector<LabeledExample> out;
    out.reserve(records.size());
    for (auto& r : records) out.push_back({std::move(r.image), r.label});
    return out;
}

std::vector<LabeledExample> select_classes(std::span<const LabeledExample> data,
                                           std::span<const std::size_t> classes,
                                           std::size_t per_class_limit) {
    std::vector<std::size_t> taken(classes.size(), 0);
    std::vector<LabeledExample> out;
    for (const auto& ex : data) {
        for (std::size_t k = 0; k < classes.size(); ++k) {
            if (ex.label != classes[k] || taken[k] >= per_class_limit) continue;
            ++taken[k];
            out.push_back({ex.image, k});
            break;
        }
    }
    return out;
}

Image8 png_read(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    static constexpr std::array<std::uint8_t, 8> kSignature{0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A,
                                                            0x0A};
    if (bytes.size() < 33 || !std::equal(kSignature.begin(), kSignature.end(), bytes.begin()))
        throw FormatError(path.string() + ": not a PNG file");
    // IHDR is always first: bit depth at byte 24, colour type at byte 25.
    const unsigned bit_depth = bytes[24];
    const unsigned color_type = bytes[25];
    if (bit_depth != 8)
        throw FormatError(path.string() + ": unsupported bit depth " + std::to_string(bit_depth) +
                          " (only 8-bit PNGs are supported)");
    if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB)
        throw FormatError(path.string() + ": unsupported colour type " +
                          std::to_string(color_type) + " (only gray or RGB)");

    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw FormatError(path.string() + ": " + image.message);
    const std::size_t channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
    image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw FormatError(path.string() + ": " + msg);
    }
    return Image8(image.height, image.width, channels, std::move(px));
}

void png_write(const Image8& img, const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.data().data(), 0, nullptr))
        throw IoError(path.string() + ": " + image.message);
}

Image8 augment(const Image8& img, SubkeyStream& stream) {
    constexpr long kPad = 4;
    const auto oy = static_cast<long>(stream.uniform(2 * kPad + 1));
    const auto ox = static_cast<long>(stream.uniform(2 * kPad + 1));
    const bool flip = stream.uniform(2) == 1;
    const std::size_t H = img.height(), W = img.width(), C = img.channels();
    Image8 out(H, W, C);
    for (std::size_t y = 0; y < H; ++y) {
        const std::size_t sy = reflect(static_cast<long>(y) + oy - kPad, H);
        for (std::size_t x = 0; x < W; ++x) {
            const std::size_t xx = flip ? W - 1 - x : x;
            const std::size_t sx = reflect(static_cast<long>(xx) + ox - kPad, W);
            for (std::size_t c = 0; c < C; ++c) out.at(y, x, c) = img.at(sy, sx, c);
        }
    }
    return out;
}

std::string format_manifest(const DatasetManifest& m) {
    std::ostringstream out;
    out << "scheme=" << scheme_name(m.scheme) << '\n'
        << "block_size=" << m.block_size << '\n'
        << "key_fingerprint=" << m.key_fingerprint << '\n'
        << "count=" << m.count << '\n'
        << "augmented=" << (m.augmented ? 1 : 0) << '\n';
    return out.str();
}

DatasetManifest parse_manifest(std::string_view text) {
    std::map<std::string, std::string> fields;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("manifest: malformed line '" + line + "'");
        fields[line.substr(0, eq)] = line.substr(eq + 1);
    }
    for (const char* f : {"scheme", "block_size", "key_fingerprint", "count", "augmented"})
        if (!fields.contains(f)) throw ParseError(std::string("manifest: missing field '") + f + "'");
    DatasetManifest m;
    m.scheme = parse_scheme(fields["scheme"]);
    try {
        m.block_size = std::stoul(fields["block_size"]);
        m.count = std::stoul(fields["count"]);
    } catch (const std::exception&) {
        throw ParseError("manifest: non-numeric block_size or count");
    }
    m.key_fingerprint = fields["key_fingerprint"];
    m.augmented = fields["augmented"] == "1";
    return m;
}

std::filesystem::path manifest_path(const std::filesystem::path& dataset_path) {
    return std::filesystem::path(dataset_path.string() + ".manifest");
}

DatasetManifest scramble_dataset(const std::filesystem::path& in_path,
                                 const std::filesystem::path& out_path, const ScrambleKey& key,
                                 CifarVariant variant, bool augment_first,
                                 std::uint64_t augment_seed) {
    auto records = read_cifar_records(in_path, variant);
    const ScramblePlan plan = make_plan(key, kCifarSide, kCifarSide);
    const Seed256 aug_root = seed_from_u64(augment_seed);

    std::vector<std::exception_ptr> failure(records.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(records.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        try {
            Image8 img = records[i].image;
            if (augment_first) {
                SubkeyStream stream = derive(aug_root, "dataset/augment", i);
                img = augment(img, stream);
            }
            records[i].image = scramble(img, plan);
        } catch (...) {
            failure[i] = std::current_exception();
        }
    }
    for (const auto& f : failure)
        if (f) std::rethrow_exception(f);

    write_cifar_records(out_path, records, variant);
    DatasetManifest m;
    m.scheme = key.scheme;
    m.block_size = key.block_size;
    m.key_fingerprint = key_fingerprint(key);
    m.count = records.size();
    m.augmented = augment_first;
    write_file(manifest_path(out_path), format_manifest(m));
    return m;
}

} // namespace blockscramble
