/**
 * Regression-gap convergence figure: gap against bath half-bandwidth on
 * a log scale, one point per sweep refinement.
 */

import { GapSweepRow, parseGapSweepCsv, readText } from "./schema.js";
import { EChartsOption, renderSvg, writeSvg } from "./render.js";

export function buildGapSweepOption(rows: GapSweepRow[]): EChartsOption {
  return {
    title: { text: "regression gap vs bath refinement" },
    xAxis: { type: "log", name: "half-bandwidth W" },
    yAxis: { type: "log", name: "|lhs - rhs|" },
    series: [
      {
        name: "gap",
        type: "line",
        symbolSize: 8,
        label: {
          show: true,
          formatter: (params: any) => `M=${rows[params.dataIndex].M}`,
        },
        data: rows.map((row) => [row.W, row.gap]),
      },
    ],
  };
}

export function renderGapSweep(inputPath: string, outPath: string): string {
  const svg = renderSvg(buildGapSweepOption(parseGapSweepCsv(readText(inputPath))));
  writeSvg(outPath, svg);
  return svg;
}
