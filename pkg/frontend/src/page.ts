/**
 * Entry script for the hosted harness page: installs the shim on the real
 * window before any payload can arrive, so every hook is in place when the
 * driver calls window.__harnessRun.
 */
import { installHarness } from "./shim.js";

installHarness(window);
