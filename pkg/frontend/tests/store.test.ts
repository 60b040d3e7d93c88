// Store behaviors outside the scripted replay: restoring after a
// refresh and surfacing service errors.

import { describe, expect, it } from 'vitest'

import { ApiClient, ApiError, FetchLike, SessionView } from '../src/api.js'
import { SessionStore } from '../src/store.js'

function viewFixture(overrides: Partial<SessionView> = {}): SessionView {
    return {
        id: 'abc123',
        status: 'active',
        phase: 'awaiting_observation',
        clock: 2,
        policy: 'qmdp',
        config: { t_min: 2, t_max: 5 },
        prev_announce: 4,
        history: {
            observations: [3, 4],
            completed_flags: [false, false],
            announcements: [3, 4],
        },
        belief: [
            { completion: 4, probability: 0.6 },
            { completion: 5, probability: 0.4 },
        ],
        recommendation: 4,
        ...overrides,
    }
}

function fetchReturning(status: number, body: unknown): FetchLike {
    return async () =>
        new Response(JSON.stringify(body), {
            status,
            headers: { 'Content-Type': 'application/json' },
        })
}

describe('session restore', () => {
    it('rebuilds the timeline from recorded history', async () => {
        const store = new SessionStore(new ApiClient('', fetchReturning(200, viewFixture())))
        await store.restore('abc123')
        expect(store.timeline.length).toBe(2)
        expect(store.timeline[0]).toMatchObject({
            t: 0, observation: 3, announcement: 3, changed: false, belief_mode: null,
        })
        expect(store.timeline[1]).toMatchObject({
            t: 1, observation: 4, announcement: 4, changed: true,
        })
        expect(store.belief).toEqual(viewFixture().belief)
    })
})

describe('error handling', () => {
    it('maps service errors to ApiError with the detail text', async () => {
        const api = new ApiClient('', fetchReturning(409, { detail: 'an announcement is pending' }))
        await expect(api.observe('abc123', 4, false)).rejects.toThrowError(ApiError)
        await expect(api.observe('abc123', 4, false)).rejects.toThrowError(/pending/)
    })

    it('requires a session before submitting estimates', async () => {
        const store = new SessionStore(new ApiClient('', fetchReturning(200, {})))
        await expect(store.submitEstimate(4, false)).rejects.toThrowError(/no session/)
    })
})
