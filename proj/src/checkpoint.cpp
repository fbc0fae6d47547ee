#include "blockscramble/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <sstream>

namespace blockscramble {

namespace {

constexpr char kMagic[8] = {'B', 'S', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::size_t kMaxRank = 8;

void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
public:
    Reader(std::vector<std::uint8_t> bytes, std::string where)
        : bytes_(std::move(bytes)), where_(std::move(where)) {}

    std::uint64_t le(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::string text(std::size_t n) {
        need(n);
        std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                      bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return s;
    }
    bool at_end() const noexcept { return pos_ == bytes_.size(); }
    std::size_t pos() const noexcept { return pos_; }
    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError(where_ + ": " + what + " at byte offset " + std::to_string(pos_));
    }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) fail("unexpected end of checkpoint");
    }
    std::vector<std::uint8_t> bytes_;
    std::string where_;
    std::size_t pos_ = 0;
};

std::size_t to_size(const std::map<std::string, std::string>& meta, const std::string& key) {
    const auto it = meta.find(key);
    if (it == meta.end()) throw FormatError("checkpoint metadata lacks '" + key + "'");
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(key);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw FormatError("checkpoint metadata '" + key + "' is not an integer");
    }
}

} // namespace

std::map<std::string, std::string> config_to_metadata(const ModelConfig& cfg) {
    std::ostringstream noise;
    noise.precision(17);
    noise << cfg.subnet_init_noise;
    return {
        {"model.adapt", cfg.adapt ? std::string(adapt_mode_name(*cfg.adapt)) : "none"},
        {"model.height", std::to_string(cfg.height)},
        {"model.width", std::to_string(cfg.width)},
        {"model.block_size", std::to_string(cfg.block_size)},
        {"model.feature_channels", std::to_string(cfg.feature_channels)},
        {"model.nibble_input", cfg.nibble_input ? "1" : "0"},
        {"model.num_classes", std::to_string(cfg.num_classes)},
        {"model.conv1_channels", std::to_string(cfg.conv1_channels)},
        {"model.conv2_channels", std::to_string(cfg.conv2_channels)},
        {"model.subnet_init_noise", noise.str()},
    };
}

ModelConfig config_from_metadata(const std::map<std::string, std::string>& meta) {
    ModelConfig cfg;
    const auto adapt = meta.find("model.adapt");
    if (adapt == meta.end()) throw FormatError("checkpoint metadata lacks 'model.adapt'");
    if (adapt->second == "none") cfg.adapt.reset();
    else if (adapt->second == "LE") cfg.adapt = AdaptMode::LE;
    else if (adapt->second == "ELE") cfg.adapt = AdaptMode::ELE;
    else throw FormatError("checkpoint metadata: unknown adapt mode '" + adapt->second + "'");
    cfg.height = to_size(meta, "model.height");
    cfg.width = to_size(meta, "model.width");
    cfg.block_size = to_size(meta, "model.block_size");
    cfg.feature_channels = to_size(meta, "model.feature_channels");
    cfg.nibble_input = to_size(meta, "model.nibble_input") != 0;
    cfg.num_classes = to_size(meta, "model.num_classes");
    cfg.conv1_channels = to_size(meta, "model.conv1_channels");
    cfg.conv2_channels = to_size(meta, "model.conv2_channels");
    if (const auto it = meta.find("model.subnet_init_noise"); it != meta.end())
        cfg.subnet_init_noise = std::stod(it->second);
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw FormatError(std::string("checkpoint metadata: ") + e.what());
    }
    return cfg;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const std::map<std::string, std::string>& extra) {
    auto meta = config_to_metadata(model.config());
    for (const auto& [k, v] : extra) {
        if (k.empty() || k.find_first_of("=\n") != std::string::npos ||
            v.find('\n') != std::string::npos)
            throw DomainError("checkpoint metadata entry '" + k + "' is not a single key=value line");
        if (k.rfind("model.", 0) == 0)
            throw DomainError("checkpoint metadata key '" + k + "' is reserved");
        meta[k] = v;
    }
    std::string text;
    for (const auto& [k, v] : meta) text += k + "=" + v + "\n";

    std::string out(kMagic, sizeof kMagic);
    put_le(out, text.size(), 4);
    out += text;
    const auto slots = model.slots();
    put_le(out, slots.size(), 4);
    for (const auto& s : slots) {
        put_le(out, s.name.size(), 4);
        out += s.name;
        put_le(out, s.shape.size(), 4);
        for (std::size_t d : s.shape) put_le(out, d, 8);
        for (double v : s.values) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    Reader r({std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()}, path.string());

    if (r.text(sizeof kMagic) != std::string(kMagic, sizeof kMagic))
        r.fail("bad magic (not a checkpoint or unsupported version)");
    const auto meta_len = r.le(4);
    std::map<std::string, std::string> meta;
    {
        std::istringstream in(r.text(meta_len));
        std::string line;
        while (std::getline(in, line)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) r.fail("malformed metadata line '" + line + "'");
            meta[line.substr(0, eq)] = line.substr(eq + 1);
        }
    }

    Checkpoint ck{Model(config_from_metadata(meta)), {}};
    for (const auto& [k, v] : meta)
        if (k.rfind("model.", 0) != 0) ck.extra[k] = v;

    auto slots = ck.model.slots();
    const auto count = r.le(4);
    if (count != slots.size())
        r.fail("expected " + std::to_string(slots.size()) + " tensors, found " +
               std::to_string(count));
    for (auto& s : slots) {
        const std::string name = r.text(r.le(4));
        if (name != s.name) r.fail("expected tensor '" + s.name + "', found '" + name + "'");
        const auto rank = r.le(4);
        if (rank > kMaxRank) r.fail("tensor '" + name + "' has rank " + std::to_string(rank));
        std::vector<std::size_t> dims(rank);
        for (auto& d : dims) d = r.le(8);
        if (dims != s.shape) r.fail("tensor '" + name + "' shape does not match the configuration");
        for (double& v : s.values) v = std::bit_cast<double>(r.le(8));
    }
    if (!r.at_end()) r.fail("trailing bytes after the last tensor");
    return ck;
}

} // namespace blockscramble
