import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

/** Environment for the core subprocess: repo-local sources on PYTHONPATH
 * so the tests run from a fresh checkout without installing the core. */
export function coreEnv(): Record<string, string> {
  const here = dirname(fileURLToPath(import.meta.url)); // frontend/dist/test
  const repoSrc = join(here, "..", "..", "..", "src");
  const existing = process.env.PYTHONPATH;
  return { PYTHONPATH: existing ? `${repoSrc}:${existing}` : repoSrc };
}

export const PYTHON = process.env.NOCSKIT_PYTHON ?? "python3";
