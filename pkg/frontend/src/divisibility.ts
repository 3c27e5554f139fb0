/**
 * Divisibility figure: the operator norm over time with every interval
 * where the one-step propagator loses complete positivity shaded, plus
 * a marker at the first violation time from the report.
 */

import { dirname, join } from "node:path";
import {
  DivisibilityReport,
  TimeseriesData,
  parseDivisibilityReport,
  parseTimeseriesCsv,
  readText,
} from "./schema.js";
import { EChartsOption, renderSvg, writeSvg } from "./render.js";

export function violationIntervals(ts: TimeseriesData, tol: number): [number, number][] {
  const out: [number, number][] = [];
  let start: number | null = null;
  for (let k = 0; k < ts.t.length; k++) {
    const eig = ts.minStepChoiEig[k];
    const violated = eig !== null && eig < -tol;
    if (violated && start === null) start = ts.t[k];
    if (!violated && start !== null) {
      out.push([start, ts.t[k]]);
      start = null;
    }
  }
  if (start !== null) out.push([start, ts.t[ts.t.length - 1]]);
  return out;
}

export function buildDivisibilityOption(
  report: DivisibilityReport,
  ts: TimeseriesData,
): EChartsOption {
  const intervals = violationIntervals(ts, report.tol);
  const flags = `CP-divisible: ${report.cpDivisible}  P-divisible: ${report.pDivisible}  semigroup: ${report.semigroup}`;
  return {
    title: { text: "operator norm and divisibility violations", subtext: flags },
    xAxis: { type: "value", name: "t" },
    yAxis: { type: "value", name: "opnorm" },
    series: [
      {
        name: "opnorm",
        type: "line",
        showSymbol: false,
        data: ts.t.map((t, k) => [t, ts.opnorm[k]]),
        markArea: {
          silent: true,
          itemStyle: { color: "rgba(220, 80, 80, 0.25)" },
          data: intervals.map(([a, b]) => [{ xAxis: a }, { xAxis: b }]),
        },
        markLine:
          report.firstViolationTime === null
            ? undefined
            : {
                silent: true,
                symbol: "none",
                lineStyle: { type: "dotted" },
                label: { formatter: "first violation" },
                data: [{ xAxis: report.firstViolationTime }],
              },
      },
    ],
  };
}

/** The report JSON names the run; its time series sits next to it. */
export function timeseriesPathFor(reportPath: string): string {
  return join(dirname(reportPath), "divisibility_timeseries.csv");
}

export function renderDivisibility(
  reportPath: string,
  outPath: string,
  timeseriesPath?: string,
): string {
  const report = parseDivisibilityReport(readText(reportPath));
  const ts = parseTimeseriesCsv(readText(timeseriesPath ?? timeseriesPathFor(reportPath)));
  const svg = renderSvg(buildDivisibilityOption(report, ts));
  writeSvg(outPath, svg);
  return svg;
}
