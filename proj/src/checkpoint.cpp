#include "reface/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "reface/tensor.hpp"

namespace reface::train {

namespace {

constexpr char kMagic[4] = {'A', 'P', 'B', '2'};

void put_u16(std::string& out, uint16_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char(v >> 8));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) fail_value("truncated checkpoint (need ", n, " bytes at offset ", pos, ")");
    }
    uint8_t u8() {
        need(1);
        return uint8_t(buf[pos++]);
    }
    uint16_t u16() {
        need(2);
        uint16_t v = uint16_t(uint8_t(buf[pos])) | uint16_t(uint8_t(buf[pos + 1])) << 8;
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(buf[pos + size_t(i)])) << (8 * i);
        pos += 4;
        return v;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

CheckpointEntry make_f32_entry(std::string name, std::vector<int> shape, std::vector<float> data) {
    CheckpointEntry e;
    e.name = std::move(name);
    e.tag = kTagF32;
    e.shape = std::move(shape);
    if (numel_of(e.shape) != int64_t(data.size()))
        fail_value("entry '", e.name, "': shape/data mismatch");
    e.f32 = std::move(data);
    return e;
}

CheckpointEntry make_bytes_entry(std::string name, std::vector<uint8_t> bytes) {
    CheckpointEntry e;
    e.name = std::move(name);
    e.tag = kTagBytes;
    e.shape = {int(bytes.size())};
    e.bytes = std::move(bytes);
    return e;
}

CheckpointEntry make_u64_entry(std::string name, uint64_t value) {
    std::vector<uint8_t> b(8);
    for (int i = 0; i < 8; ++i) b[size_t(i)] = uint8_t((value >> (8 * i)) & 0xff);
    return make_bytes_entry(std::move(name), std::move(b));
}

uint64_t read_u64_entry(const CheckpointEntry& e) {
    if (e.tag != kTagBytes || e.bytes.size() != 8)
        fail_value("entry '", e.name, "' is not a u64 record");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(e.bytes[size_t(i)]) << (8 * i);
    return v;
}

void save_checkpoint_file(const std::string& path, const std::vector<CheckpointEntry>& entries) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kCheckpointVersion);
    put_u32(out, uint32_t(entries.size()));
    for (const auto& e : entries) {
        if (e.name.size() > 0xffff) fail_value("entry name too long: ", e.name.size(), " bytes");
        put_u16(out, uint16_t(e.name.size()));
        out.append(e.name);
        if (e.shape.size() > 0xff) fail_value("entry '", e.name, "': rank ", e.shape.size(), " too large");
        out.push_back(char(uint8_t(e.shape.size())));
        for (int d : e.shape) {
            if (d < 0) fail_value("entry '", e.name, "': negative dim");
            put_u32(out, uint32_t(d));
        }
        out.push_back(char(e.tag));
        if (e.tag == kTagF32) {
            if (int64_t(e.f32.size()) != numel_of(e.shape))
                fail_value("entry '", e.name, "': payload does not match dims");
            static_assert(sizeof(float) == 4);
            size_t off = out.size();
            out.resize(off + e.f32.size() * 4);
            std::memcpy(out.data() + off, e.f32.data(), e.f32.size() * 4);
        } else if (e.tag == kTagBytes) {
            if (e.shape.size() != 1 || int64_t(e.bytes.size()) != int64_t(e.shape[0]))
                fail_value("entry '", e.name, "': byte payload does not match dims");
            out.append(reinterpret_cast<const char*>(e.bytes.data()), e.bytes.size());
        } else {
            fail_value("entry '", e.name, "': unknown dtype tag ", int(e.tag));
        }
    }

    // Write to a temp file then rename so a crash never leaves a torn file.
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) fail_value("cannot open '", tmp, "' for writing");
        f.write(out.data(), std::streamsize(out.size()));
        if (!f) fail_value("short write to '", tmp, "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) fail_value("cannot rename '", tmp, "' to '", path, "'");
}

std::vector<CheckpointEntry> load_checkpoint_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_value("cannot open checkpoint '", path, "'");
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Reader r{buf};
    std::string magic = r.bytes(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0) fail_value("'", path, "' is not a checkpoint (bad magic)");
    uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        fail_value("checkpoint version ", version, " unsupported (expected ", kCheckpointVersion, ")");
    uint32_t count = r.u32();

    std::vector<CheckpointEntry> entries;
    entries.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        uint16_t nlen = r.u16();
        e.name = r.bytes(nlen);
        uint8_t rank = r.u8();
        e.shape.resize(rank);
        for (auto& d : e.shape) {
            uint32_t v = r.u32();
            if (v > uint32_t(INT32_MAX)) fail_value("entry '", e.name, "': dim overflow");
            d = int(v);
        }
        e.tag = r.u8();
        if (e.tag == kTagF32) {
            int64_t n = numel_of(e.shape);
            std::string raw = r.bytes(size_t(n) * 4);
            e.f32.resize(size_t(n));
            std::memcpy(e.f32.data(), raw.data(), raw.size());
        } else if (e.tag == kTagBytes) {
            if (e.shape.size() != 1) fail_value("entry '", e.name, "': byte record must be rank 1");
            std::string raw = r.bytes(size_t(e.shape[0]));
            e.bytes.assign(raw.begin(), raw.end());
        } else {
            fail_value("entry '", e.name, "': unknown dtype tag ", int(e.tag));
        }
        entries.push_back(std::move(e));
    }
    if (r.pos != buf.size()) fail_value("trailing garbage after entry ", count, " in '", path, "'");
    return entries;
}

}  // namespace reface::train
