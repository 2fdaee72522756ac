/** Shared test plumbing: fresh jsdom sessions and trace canonicalization. */
import { JSDOM, VirtualConsole } from "jsdom";
import {
  HARNESS_NOISE_PREFIX,
  HarnessShim,
  installHarness,
  type InjectionContext,
  type ShimOptions,
  type TraceDocument,
  type TraceEventRow,
} from "../src/shim.js";

export interface Session {
  dom: JSDOM;
  win: Window & typeof globalThis;
  shim: HarnessShim;
  virtualConsole: VirtualConsole;
  run(
    payload: string,
    context?: InjectionContext,
    timeoutMs?: number,
    settleMs?: number,
  ): Promise<TraceDocument>;
  close(): void;
}

const PAGE_HTML =
  '<!doctype html><html><head><meta charset="utf-8"></head>' +
  '<body><div id="harness-sink"></div></body></html>';

/** One isolated page: fresh DOM, fresh globals, hooks installed. */
export function makeSession(options: ShimOptions = {}): Session {
  const virtualConsole = new VirtualConsole();
  virtualConsole.on("jsdomError", () => {});
  const dom = new JSDOM(PAGE_HTML, {
    url: "http://harness.local/",
    runScripts: "dangerously",
    virtualConsole,
  });
  const win = dom.window as unknown as Window & typeof globalThis;
  const shim = installHarness(win, options);
  return {
    dom,
    win,
    shim,
    virtualConsole,
    async run(payload, context = "html_body", timeoutMs = 3000, settleMs = 60) {
      const hooked = win as unknown as {
        __harnessRun(
          p: string,
          c: string,
          t: number,
          s: number,
        ): Promise<string>;
      };
      const raw = await hooked.__harnessRun(payload, context, timeoutMs, settleMs);
      return JSON.parse(raw) as TraceDocument;
    },
    close() {
      dom.window.close();
    },
  };
}

/** Run one payload in a throwaway session and return its parsed trace. */
export async function runPayload(
  payload: string,
  context: InjectionContext = "html_body",
  timeoutMs = 3000,
  settleMs = 60,
): Promise<TraceDocument> {
  const session = makeSession();
  try {
    return await session.run(payload, context, timeoutMs, settleMs);
  } finally {
    session.close();
  }
}

/** Events the payload produced: the shim's own noise lines are dropped. */
export function payloadEvents(trace: TraceDocument): TraceEventRow[] {
  return trace.events.filter(
    (ev) => !(ev.kind === "console" && ev.message.startsWith(HARNESS_NOISE_PREFIX)),
  );
}

function squash(text: string): string {
  return text.split(/\s+/).filter((part) => part !== "").join(" ");
}

function resolveAgainst(origin: string, url: string): string {
  let resolved: string;
  try {
    resolved = new URL(url, origin).href;
  } catch {
    resolved = url;
  }
  const hash = resolved.indexOf("#");
  return hash >= 0 ? resolved.slice(0, hash) : resolved;
}

export interface CanonicalTrace {
  status: string;
  events: string[][];
}

/**
 * Order-insensitive comparable form: duration dropped, whitespace squashed,
 * network URLs resolved against the origin minus fragment, harness noise
 * console rows dropped, rows sorted.
 */
export function canonicalize(
  trace: TraceDocument,
  origin = "http://harness.local",
): CanonicalTrace {
  const rows: string[][] = [];
  for (const ev of trace.events) {
    if (ev.kind === "console" && ev.message.startsWith(HARNESS_NOISE_PREFIX)) {
      continue;
    }
    if (ev.kind === "network") {
      rows.push(["network", ev.method, resolveAgainst(origin, ev.url)]);
    } else if (ev.kind === "console") {
      rows.push(["console", squash(ev.level), squash(ev.message)]);
    } else {
      rows.push([ev.kind, squash(ev.message)]);
    }
  }
  rows.sort((a, b) => {
    const n = Math.min(a.length, b.length);
    for (let i = 0; i < n; i += 1) {
      const x = a[i]!;
      const y = b[i]!;
      if (x < y) return -1;
      if (x > y) return 1;
    }
    return a.length - b.length;
  });
  return { status: trace.status, events: rows };
}

/** Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF. */
export function parseCsv(text: string): string[][] {
  const rows: string[][] = [];
  let row: string[] = [];
  let field = "";
  let quoted = false;
  let i = 0;
  while (i < text.length) {
    const ch = text[i]!;
    if (quoted) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          field += '"';
          i += 2;
        } else {
          quoted = false;
          i += 1;
        }
      } else {
        field += ch;
        i += 1;
      }
    } else if (ch === '"' && field === "") {
      quoted = true;
      i += 1;
    } else if (ch === ",") {
      row.push(field);
      field = "";
      i += 1;
    } else if (ch === "\n" || ch === "\r") {
      if (ch === "\r" && text[i + 1] === "\n") {
        i += 1;
      }
      row.push(field);
      rows.push(row);
      row = [];
      field = "";
      i += 1;
    } else {
      field += ch;
      i += 1;
    }
  }
  if (field !== "" || row.length > 0) {
    row.push(field);
    rows.push(row);
  }
  return rows;
}
