/** Batch renderer: `node dist/cli.js jobs.json`
 *
 * The job-list file is a JSON array of figure jobs:
 *   [{ "kind": "profile", "inputs": ["out/profile.csv"], "output": "profile.svg" }, ...]
 * Jobs are independent; an empty-but-valid CSV yields a "no data" placeholder
 * figure and exit code 0, while a schema violation is a hard error.
 */

import { readFileSync } from "fs";
import { FigureJob, render } from "./figures.js";

export function main(argv: string[]): number {
  const jobFile = argv[0];
  if (!jobFile) {
    console.error("usage: cli.js <jobs.json>");
    return 2;
  }
  let jobs: FigureJob[];
  try {
    jobs = JSON.parse(readFileSync(jobFile, "utf-8"));
  } catch (e) {
    console.error(`cannot read job list: ${(e as Error).message}`);
    return 2;
  }
  for (const job of jobs) {
    render(job);
    console.log(`${job.kind} -> ${job.output}`);
  }
  return 0;
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
