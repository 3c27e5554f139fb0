/**
 * Decay figure: |A_ij(t)| for every matrix entry of a survival CSV.
 * For flat-coupling models (metadata flat=1 with a gamma entry) the
 * analytic reference exp(-gamma*t/2) is overlaid.
 */

import { parseSurvivalCsv, readText, SurvivalData } from "./schema.js";
import { EChartsOption, SeriesOption, renderSvg, writeSvg } from "./render.js";

export function buildDecayOption(data: SurvivalData): EChartsOption {
  const series: SeriesOption[] = [];
  for (const [label, values] of data.moduli) {
    series.push({
      name: label,
      type: "line",
      showSymbol: false,
      data: data.times.map((t, k) => [t, values[k]]),
    });
  }
  const gamma = Number(data.meta["gamma"]);
  const isFlat = data.meta["flat"] === "1" && Number.isFinite(gamma);
  if (isFlat) {
    series.push({
      name: "flat reference exp(-gamma t/2)",
      type: "line",
      showSymbol: false,
      lineStyle: { type: "dashed" },
      data: data.times.map((t) => [t, Math.exp((-gamma * t) / 2)]),
    });
  }
  return {
    title: { text: `survival amplitude decay (${data.meta["provenance"] ?? "unknown"})` },
    legend: { top: 28 },
    xAxis: { type: "value", name: "t" },
    yAxis: { type: "value", name: "|A(t)| entry modulus" },
    series,
  };
}

export function renderDecay(inputPath: string, outPath: string): string {
  const svg = renderSvg(buildDecayOption(parseSurvivalCsv(readText(inputPath))));
  writeSvg(outPath, svg);
  return svg;
}
