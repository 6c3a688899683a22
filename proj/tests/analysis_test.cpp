#include "vistatest/analysis_report.h"

#include <gtest/gtest.h>

TEST(Stub, analysis) { SUCCEED(); }
