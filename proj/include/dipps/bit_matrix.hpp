#pragma once

// Bit-packed binary matrix. Rows live in contiguous 64-bit words, so
// row-level operations (equality, popcount, masked popcount) run a word at a
// time; that is what keeps smoothing and the proportion statistics cheap on
// matrices with tens of millions of entries.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dipps/error.hpp"

namespace dipps {

class BitMatrix {
 public:
  using Word = std::uint64_t;
  static constexpr std::size_t kWordBits = 64;

  BitMatrix() = default;
  BitMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows),
        cols_(cols),
        wpr_((cols + kWordBits - 1) / kWordBits),
        words_(rows * wpr_, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t words_per_row() const { return wpr_; }

  bool get(std::size_t i, std::size_t j) const {
    return (words_[i * wpr_ + j / kWordBits] >> (j % kWordBits)) & 1u;
  }

  void set(std::size_t i, std::size_t j, bool v) {
    Word& w = words_[i * wpr_ + j / kWordBits];
    const Word bit = Word{1} << (j % kWordBits);
    if (v)
      w |= bit;
    else
      w &= ~bit;
  }

  std::span<const Word> row(std::size_t i) const {
    return {words_.data() + i * wpr_, wpr_};
  }
  std::span<Word> row(std::size_t i) { return {words_.data() + i * wpr_, wpr_}; }

  std::size_t row_popcount(std::size_t i) const {
    std::size_t n = 0;
    for (Word w : row(i)) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  std::size_t row_and_popcount(std::size_t i, std::span<const Word> mask) const {
    if (mask.size() != wpr_)
      throw ContractViolation("bit mask width does not match matrix");
    std::size_t n = 0;
    auto r = row(i);
    for (std::size_t w = 0; w < wpr_; ++w)
      n += static_cast<std::size_t>(std::popcount(r[w] & mask[w]));
    return n;
  }

  // Visit the column index of every set bit in row i, ascending.
  template <typename Fn>
  void for_each_set_in_row(std::size_t i, Fn&& fn) const {
    auto r = row(i);
    for (std::size_t w = 0; w < wpr_; ++w) {
      Word bits = r[w];
      while (bits) {
        const std::size_t j =
            w * kWordBits + static_cast<std::size_t>(std::countr_zero(bits));
        fn(j);
        bits &= bits - 1;
      }
    }
  }

  // Entrywise complement; padding bits beyond cols stay zero.
  BitMatrix complement() const {
    BitMatrix out(rows_, cols_);
    const Word tail_mask = tail();
    for (std::size_t i = 0; i < rows_; ++i) {
      auto src = row(i);
      auto dst = out.row(i);
      for (std::size_t w = 0; w < wpr_; ++w) dst[w] = ~src[w];
      if (wpr_ > 0) dst[wpr_ - 1] &= tail_mask;
    }
    return out;
  }

  friend bool operator==(const BitMatrix&, const BitMatrix&) = default;

 private:
  Word tail() const {
    const std::size_t rem = cols_ % kWordBits;
    return rem == 0 ? ~Word{0} : (Word{1} << rem) - 1;
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t wpr_ = 0;
  std::vector<Word> words_;
};

// A set of columns stored as a bit mask with the same word layout as a
// matrix row, so subset counts reduce to AND + popcount per row.
class ColumnMask {
 public:
  using Word = BitMatrix::Word;

  explicit ColumnMask(std::size_t cols)
      : cols_(cols), words_((cols + BitMatrix::kWordBits - 1) / BitMatrix::kWordBits, 0) {}

  static ColumnMask from_indices(std::size_t cols, std::span<const std::size_t> idx) {
    ColumnMask m(cols);
    for (std::size_t j : idx) m.set(j);
    return m;
  }

  void set(std::size_t j) {
    if (j >= cols_) throw ContractViolation("column index out of range");
    words_[j / BitMatrix::kWordBits] |= Word{1} << (j % BitMatrix::kWordBits);
  }

  bool get(std::size_t j) const {
    return (words_[j / BitMatrix::kWordBits] >> (j % BitMatrix::kWordBits)) & 1u;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (Word w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  std::size_t cols() const { return cols_; }
  std::span<const Word> words() const { return words_; }

 private:
  std::size_t cols_;
  std::vector<Word> words_;
};

}  // namespace dipps
