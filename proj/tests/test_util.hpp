#pragma once

#include <doctest.h>

#include "tempo/error.hpp"

// Checks that expr throws tempo::Error of the given category.
#define CHECK_THROWS_CATEGORY(expr, cat)                        \
  do {                                                          \
    bool tempo_thrown_ = false;                                 \
    try {                                                       \
      (void)(expr);                                             \
    } catch (const tempo::Error& e) {                           \
      tempo_thrown_ = true;                                     \
      CHECK(e.category() == (cat));                             \
    }                                                           \
    CHECK_MESSAGE(tempo_thrown_, "expected tempo::Error: " #expr); \
  } while (0)
