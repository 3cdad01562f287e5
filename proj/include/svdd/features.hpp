// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/features/cepstral.hpp"
#include "svdd/features/cqcc.hpp"
#include "svdd/features/feature_io.hpp"
#include "svdd/features/filterbank.hpp"
#include "svdd/features/resample.hpp"
#include "svdd/features/stft.hpp"
#include "svdd/features/types.hpp"
#include "svdd/features/vad.hpp"
#include "svdd/features/wav.hpp"
