import { createServer, type Server } from "node:http";
import { AddressInfo } from "node:net";
import { describe, expect, it } from "vitest";
import type { InjectionContext } from "../src/shim.js";
import { makeSession, payloadEvents, runPayload } from "./helpers.js";

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

describe("dialog capture", () => {
  it("records alert from a script-context payload", async () => {
    const trace = await runPayload("alert('hi')", "script");
    expect(trace.status).toBe("completed");
    expect(payloadEvents(trace)).toEqual([{ kind: "alert", message: "hi" }]);
  });

  it("records alert from a markup script element", async () => {
    const trace = await runPayload("<script>alert(1)</script>");
    expect(payloadEvents(trace)).toEqual([{ kind: "alert", message: "1" }]);
  });

  it("returns neutral values from confirm and prompt while recording them", async () => {
    const trace = await runPayload(
      "const c = confirm('sure?');" +
        "const p = prompt('name?');" +
        "console.log(typeof c + ' ' + c + ' [' + p + ']');",
      "script",
    );
    expect(payloadEvents(trace)).toEqual([
      { kind: "alert", message: "sure?" },
      { kind: "alert", message: "name?" },
      { kind: "console", level: "log", message: "boolean false []" },
    ]);
  });
});

describe("console capture", () => {
  it("records console calls and still delegates to the host console", async () => {
    const session = makeSession();
    const forwarded: unknown[][] = [];
    session.virtualConsole.on("log", (...args: unknown[]) => {
      forwarded.push(args);
    });
    try {
      const trace = await session.run("<script>console.log('hello', 42)</script>");
      expect(payloadEvents(trace)).toEqual([
        { kind: "console", level: "log", message: "hello 42" },
      ]);
      expect(forwarded).toHaveLength(1);
      expect(forwarded[0]![0]).toBe("hello");
    } finally {
      session.close();
    }
  });

  it("records console.error with its level", async () => {
    const trace = await runPayload("<script>console.error('probe')</script>");
    expect(payloadEvents(trace)).toEqual([
      { kind: "console", level: "error", message: "probe" },
    ]);
  });
});

describe("network blocking", () => {
  it("records fetch and XHR aimed at a live sink that never gets hit", async () => {
    const hits: string[] = [];
    const server: Server = createServer((req, res) => {
      hits.push(req.url ?? "");
      res.end("leaked");
    });
    await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
    const port = (server.address() as AddressInfo).port;
    const target = `http://127.0.0.1:${port}/exfil?x=1`;
    try {
      const trace = await runPayload(
        `fetch('${target}', { method: 'POST' });` +
          `var x = new XMLHttpRequest(); x.open('GET', '${target}'); x.send();`,
        "script",
      );
      expect(payloadEvents(trace)).toEqual([
        { kind: "network", method: "POST", url: target },
        { kind: "network", method: "GET", url: target },
      ]);
      await sleep(150);
      expect(hits).toEqual([]);
    } finally {
      await new Promise<void>((resolve) => server.close(() => resolve()));
    }
  });

  it("records XMLHttpRequest send without transmitting", async () => {
    const trace = await runPayload(
      "var x = new XMLHttpRequest(); x.open('post', '/api'); x.send();",
      "script",
    );
    expect(payloadEvents(trace)).toEqual([
      { kind: "network", method: "POST", url: "http://harness.local/api" },
    ]);
  });

  it("records sendBeacon and reports success to the caller", async () => {
    const trace = await runPayload(
      "console.log(navigator.sendBeacon('/beacon'))",
      "script",
    );
    expect(payloadEvents(trace)).toEqual([
      { kind: "network", method: "POST", url: "http://harness.local/beacon" },
      { kind: "console", level: "log", message: "true" },
    ]);
  });

  it("strips img src, records the load, then fires the error handler", async () => {
    const trace = await runPayload("<img src=x onerror=alert(1)>");
    expect(payloadEvents(trace)).toEqual([
      { kind: "network", method: "GET", url: "http://harness.local/x" },
      { kind: "alert", message: "1" },
    ]);
  });

  it("records external script src without executing its body", async () => {
    const trace = await runPayload(
      '<script src="http://evil.example/x.js">alert("should not run")</script>',
    );
    expect(payloadEvents(trace)).toEqual([
      { kind: "network", method: "GET", url: "http://evil.example/x.js" },
    ]);
  });

  it("records programmatic form.submit()", async () => {
    const trace = await runPayload(
      '<form id="f" action="/steal" method="post"></form>' +
        "<script>document.getElementById('f').submit()</script>",
    );
    expect(payloadEvents(trace)).toEqual([
      { kind: "network", method: "POST", url: "http://harness.local/steal" },
    ]);
  });

  it("cancels requestSubmit and records the form action", async () => {
    const trace = await runPayload(
      '<form id="g" action="/go"></form>' +
        "<script>document.getElementById('g').requestSubmit()</script>",
    );
    expect(payloadEvents(trace)).toEqual([
      { kind: "network", method: "GET", url: "http://harness.local/go" },
    ]);
  });

  it("cancels plain anchor navigation and records the target", async () => {
    const trace = await runPayload('<a href="http://evil.example/page">x</a>');
    expect(payloadEvents(trace)).toEqual([
      { kind: "network", method: "GET", url: "http://evil.example/page" },
    ]);
  });
});

describe("gesture and lifecycle synthesis", () => {
  it("runs javascript: hrefs through native activation exactly once", async () => {
    const trace = await runPayload("<a href=\"javascript:alert('lnk')\">x</a>");
    expect(payloadEvents(trace)).toEqual([{ kind: "alert", message: "lnk" }]);
  });

  it("fires inline onclick handlers via the synthetic click", async () => {
    const trace = await runPayload("<div onclick=\"alert('clicked')\">press</div>");
    expect(payloadEvents(trace)).toEqual([{ kind: "alert", message: "clicked" }]);
  });

  it("fires svg onload exactly once", async () => {
    const trace = await runPayload("<svg onload=\"alert('svg')\"></svg>");
    expect(payloadEvents(trace)).toEqual([{ kind: "alert", message: "svg" }]);
  });
});

describe("error capture", () => {
  it("records uncaught reference errors", async () => {
    const trace = await runPayload("<script>definitelyNotDefinedFn()</script>");
    const events = payloadEvents(trace);
    expect(trace.status).toBe("completed");
    expect(events).toHaveLength(1);
    expect(events[0]!.kind).toBe("error");
    expect((events[0] as { message: string }).message).toContain(
      "definitelyNotDefinedFn",
    );
  });

  it("records script parse errors", async () => {
    const trace = await runPayload("alert('unterminated", "script");
    const events = payloadEvents(trace);
    expect(events).toHaveLength(1);
    expect(events[0]!.kind).toBe("error");
    expect((events[0] as { message: string }).message.length).toBeGreaterThan(0);
  });

  it("records unknown injection contexts as errors", async () => {
    const session = makeSession();
    try {
      const trace = await session.run("alert(1)", "bogus" as InjectionContext);
      const events = payloadEvents(trace);
      expect(events).toHaveLength(1);
      expect((events[0] as { message: string }).message).toContain(
        "unknown injection context",
      );
    } finally {
      session.close();
    }
  });
});

describe("injection contexts", () => {
  it("produces no payload events for an empty payload", async () => {
    const trace = await runPayload("");
    expect(trace.status).toBe("completed");
    expect(payloadEvents(trace)).toEqual([]);
  });

  it("keeps benign attribute values inert", async () => {
    const trace = await runPayload("hello", "attribute");
    expect(payloadEvents(trace)).toEqual([]);
  });

  it("lets attribute breakouts introduce live handlers", async () => {
    const trace = await runPayload('" onclick="alert(\'esc\')', "attribute");
    expect(payloadEvents(trace)).toEqual([{ kind: "alert", message: "esc" }]);
  });
});

describe("trace lifecycle", () => {
  it("reports timeout when events never settle", async () => {
    const session = makeSession();
    try {
      const started = Date.now();
      const trace = await session.run(
        "setInterval(function () { console.log('spam'); }, 20)",
        "script",
        400,
        150,
      );
      const elapsed = Date.now() - started;
      expect(trace.status).toBe("timeout");
      expect(trace.duration_ms).toBeGreaterThanOrEqual(350);
      expect(elapsed).toBeLessThan(2000);
      expect(
        payloadEvents(trace).filter(
          (ev) => ev.kind === "console" && ev.message === "spam",
        ).length,
      ).toBeGreaterThan(3);
    } finally {
      session.close();
    }
  });

  it("seals the trace: late events never mutate it", async () => {
    const session = makeSession();
    try {
      await session.run("<script>alert('first')</script>");
      const sealed = session.shim.getTrace();
      session.win.alert("late");
      expect(session.shim.getTrace()).toBe(sealed);
      const again = await session.run("<script>alert('second')</script>");
      expect(JSON.stringify(again)).toBe(sealed);
      expect(sealed).not.toContain("late");
      expect(sealed).not.toContain("second");
    } finally {
      session.close();
    }
  });

  it("orders trace JSON keys as status, duration_ms, events", async () => {
    const session = makeSession();
    try {
      await session.run("<script>alert(1)</script>");
      const raw = session.shim.getTrace();
      expect(raw.startsWith('{"status":"completed","duration_ms":')).toBe(true);
      expect(raw).toContain('{"kind":"alert","message":"1"}');
    } finally {
      session.close();
    }
  });

  it("returns a zero-event completed trace straight after load", () => {
    const session = makeSession();
    try {
      const trace = JSON.parse(session.shim.getTrace()) as {
        status: string;
        duration_ms: number;
        events: unknown[];
      };
      expect(trace.status).toBe("completed");
      expect(trace.events).toEqual([]);
      expect(trace.duration_ms).toBeLessThan(5000);
    } finally {
      session.close();
    }
  });
});

describe("session isolation", () => {
  it("denies a fresh session any global written by a previous payload", async () => {
    const planted = await runPayload(
      "window.__secretToken = 't0k3n'; alert(__secretToken);",
      "script",
    );
    expect(payloadEvents(planted)).toEqual([
      { kind: "alert", message: "t0k3n" },
    ]);

    const probe = await runPayload("alert(__secretToken)", "script");
    const events = payloadEvents(probe);
    expect(events).toHaveLength(1);
    expect(events[0]!.kind).toBe("error");
    expect((events[0] as { message: string }).message).toContain("__secretToken");
  });
});
