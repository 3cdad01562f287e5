// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#include "svdd/encoder/model.hpp"

#include <gtest/gtest.h>

#include <filesystem>

namespace svdd {
namespace {

// Bit-at-a-time reflected CRC-32 (polynomial 0xEDB88320).
std::uint32_t bitwise_crc32(std::string_view s) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (unsigned char c : s) {
    crc ^= c;
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

EncoderConfig toy() {
  EncoderConfig c;
  c.size = SizeName::Custom;
  c.n_blocks = 1;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 16;
  c.n_mels = 80;
  c.max_frames = 10;
  return c;
}

class ArchiveFile : public ::testing::Test {
 protected:
  void SetUp() override {
    path_ = std::filesystem::temp_directory_path() /
            ("svdd_archive_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + ".svdt");
  }
  void TearDown() override { std::filesystem::remove(path_); }
  std::filesystem::path path_;
};

TEST(Crc32, CheckValueAndOracle) {
  EXPECT_EQ(crc32_of("123456789", 9), 0xCBF43926u);
  EXPECT_EQ(bitwise_crc32("123456789"), 0xCBF43926u);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::string s(static_cast<std::size_t>(rng() % 300), '\0');
    for (char& c : s) c = static_cast<char>(rng());
    EXPECT_EQ(crc32_of(s.data(), s.size()), bitwise_crc32(s));
  }
}

TEST(Archive, RoundTripBytes) {
  TensorArchive a;
  a.tensors["b"] = {{2, 3}, {1, 2, 3, 4, 5, 6}};
  a.tensors["a"] = {{1}, {-0.5f}};
  a.tensors["empty"] = {{0, 4}, {}};
  a.metadata = {{"note", "x"}};
  const std::string bytes = encode_archive(a);
  EXPECT_EQ(bytes.substr(0, 8), "SVDDTNSR");
  const TensorArchive b = decode_archive(bytes);
  EXPECT_EQ(b.metadata, a.metadata);
  ASSERT_EQ(b.tensors.size(), 3u);
  EXPECT_EQ(b.tensors.at("b").shape, (std::vector<std::int64_t>{2, 3}));
  EXPECT_EQ(b.tensors.at("b").data, a.tensors["b"].data);
  EXPECT_EQ(b.tensors.at("a").data, a.tensors["a"].data);
  EXPECT_EQ(encode_archive(b), bytes);
}

TEST(Archive, HeaderIsReadableJson) {
  TensorArchive a;
  a.tensors["w"] = {{2}, {1.0f, 2.0f}};
  const std::string bytes = encode_archive(a);
  const std::uint32_t len = detail::read_le32(bytes.data() + 12);
  const auto header = nlohmann::json::parse(bytes.substr(16, len));
  EXPECT_EQ(header["w"]["dtype"], "f32");
  EXPECT_EQ(header["w"]["byte_length"], 8);
  EXPECT_EQ(header["w"]["offset"], 0);
  // float 1.0 little-endian
  EXPECT_EQ(bytes.substr(16 + len, 4), std::string("\x00\x00\x80\x3f", 4));
}

TEST(Archive, StructuralErrors) {
  EXPECT_THROW(decode_archive("not an archive at all"), FormatError);
  TensorArchive a;
  a.tensors["w"] = {{2}, {1.0f, 2.0f}};
  std::string bytes = encode_archive(a);
  std::string wrong_version = bytes;
  wrong_version[8] = 2;
  EXPECT_THROW(decode_archive(wrong_version), ArchiveError);
  EXPECT_THROW(decode_archive(bytes.substr(0, bytes.size() - 6)), ArchiveError);
  a.tensors["w"].shape = {3};
  EXPECT_THROW(encode_archive(a), ArchiveError);
}

TEST_F(ArchiveFile, CorruptedTensorIsNamed) {
  const EncoderModel m = random_encoder(toy(), 1);
  TensorArchive a = encoder_to_archive(m);
  std::string bytes = encode_archive(a);
  const std::uint32_t len = detail::read_le32(bytes.data() + 12);
  const auto header = nlohmann::json::parse(bytes.substr(16, len));
  const std::string victim = "encoder.blocks.0.attn.key.weight";
  const std::size_t pos = 16 + len + header[victim]["offset"].get<std::size_t>() + 5;
  bytes[pos] = static_cast<char>(bytes[pos] ^ 0x40);
  write_file_atomic(path_, bytes);
  try {
    load_weights(path_, toy());
    FAIL() << "expected a checksum failure";
  } catch (const ArchiveError& e) {
    EXPECT_EQ(e.tensor(), victim);
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
  }
}

TEST_F(ArchiveFile, MissingTensorIsNamed) {
  TensorArchive a = encoder_to_archive(random_encoder(toy(), 2));
  a.tensors.erase("encoder.blocks.0.mlp_ln.bias");
  save_archive(path_, a);
  try {
    load_weights(path_, toy());
    FAIL();
  } catch (const ArchiveError& e) {
    EXPECT_EQ(e.tensor(), "encoder.blocks.0.mlp_ln.bias");
    EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);
  }
}

TEST_F(ArchiveFile, WrongShapeIsNamed) {
  TensorArchive a = encoder_to_archive(random_encoder(toy(), 3));
  a.tensors["encoder.conv2.weight"].shape = {8, 24};
  save_archive(path_, a);
  try {
    load_weights(path_, toy());
    FAIL();
  } catch (const ArchiveError& e) {
    EXPECT_EQ(e.tensor(), "encoder.conv2.weight");
    EXPECT_NE(std::string(e.what()).find("shape"), std::string::npos);
  }
}

TEST_F(ArchiveFile, WrongSizeConfigRejected) {
  save_archive(path_, encoder_to_archive(random_encoder(toy(), 4)));
  EncoderConfig wider = toy();
  wider.d_model = 16;
  wider.d_ff = 32;
  EXPECT_THROW(load_weights(path_, wider), ArchiveError);
}

TEST_F(ArchiveFile, UnexpectedAndNonFiniteTensors) {
  TensorArchive a = encoder_to_archive(random_encoder(toy(), 5));
  a.tensors["decoder.stray"] = {{1}, {0.0f}};
  EXPECT_THROW(validate_against_layout(a, encoder_layout(toy())), ArchiveError);
  a.tensors.erase("decoder.stray");
  a.tensors["encoder.ln_post.bias"].data[0] = std::nanf("");
  try {
    validate_against_layout(a, encoder_layout(toy()));
    FAIL();
  } catch (const ArchiveError& e) {
    EXPECT_EQ(e.tensor(), "encoder.ln_post.bias");
  }
}

TEST_F(ArchiveFile, MissingFileIsIoError) {
  EXPECT_THROW(load_archive(path_.string() + ".absent"), IoError);
}

TEST_F(ArchiveFile, LoadEncoderWithoutConfigMetadata) {
  TensorArchive a = encoder_to_archive(random_encoder(toy(), 6));
  a.metadata = nlohmann::json::object();
  save_archive(path_, a);
  EXPECT_THROW(load_encoder(path_), FormatError);
  EXPECT_NO_THROW(load_weights(path_, toy()));
}

}  // namespace
}  // namespace svdd
