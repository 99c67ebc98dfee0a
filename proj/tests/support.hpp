#pragma once

#include "suite.hpp"

#include <gtest/gtest.h>

#define EXPECT_RVOS_ERROR(stmt, expected_code)                                          \
    do {                                                                                \
        try {                                                                           \
            stmt;                                                                       \
            ADD_FAILURE() << #stmt " did not throw";                                    \
        } catch (const ::rvos::Error& e__) {                                            \
            EXPECT_EQ(e__.code(), expected_code) << e__.what();                         \
        }                                                                               \
    } while (0)
