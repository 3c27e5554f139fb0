/**
 * Headless SVG rendering through the echarts SSR mode.
 *
 * zrender numbers its element classes and clip-path ids with a
 * process-global counter, which would make repeated renders differ
 * byte-wise; ids are renumbered by first appearance so identical input
 * always yields an identical file.
 */

import { writeFileSync, renameSync, mkdirSync } from "node:fs";
import { dirname } from "node:path";
import * as echartsModule from "echarts";

// the CJS build exposes the API as the default export, the ESM build as
// named exports; unwrap whichever is present
const echarts: typeof echartsModule =
  (echartsModule as { default?: typeof echartsModule }).default ?? echartsModule;

export type EChartsOption = echartsModule.EChartsOption;
export type SeriesOption = echartsModule.SeriesOption;

export const WIDTH = 900;
export const HEIGHT = 560;

function normalizeIds(svg: string): string {
  const seen = new Map<string, string>();
  const counters: Record<string, number> = {};
  return svg.replace(/zr\d+-(cls|c)-?(\d+)/g, (match, kind: string) => {
    let mapped = seen.get(match);
    if (mapped === undefined) {
      const next = counters[kind] ?? 0;
      counters[kind] = next + 1;
      mapped = `zr-${kind}-${next}`;
      seen.set(match, mapped);
    }
    return mapped;
  });
}

export function renderSvg(option: EChartsOption): string {
  const chart = echarts.init(null, null, {
    renderer: "svg",
    ssr: true,
    width: WIDTH,
    height: HEIGHT,
  });
  try {
    chart.setOption({ animation: false, ...option });
    return normalizeIds(chart.renderToSVGString());
  } finally {
    chart.dispose();
  }
}

export function writeSvg(path: string, svg: string): void {
  mkdirSync(dirname(path) || ".", { recursive: true });
  const tmp = `${path}.tmp`;
  writeFileSync(tmp, svg, "utf-8");
  renameSync(tmp, path);
}

export function parseArgs(argv: string[], scriptName: string): { input: string; out: string } {
  const positional: string[] = [];
  let out: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--out") {
      out = argv[++i];
    } else if (argv[i] === "--help" || argv[i] === "-h") {
      console.log(`usage: ${scriptName} <input> --out <image.svg>`);
      process.exit(0);
    } else {
      positional.push(argv[i]);
    }
  }
  if (positional.length !== 1 || !out) {
    console.error(`usage: ${scriptName} <input> --out <image.svg>`);
    process.exit(2);
  }
  return { input: positional[0], out };
}
